//! `hazardgen synth`: synthetic Gaussian-copula datasets for testing
//! the pipeline end to end without external data.
//!
//! Config keys: `channels`, `height`, `width`, `days`,
//! `correlation_length`, `cross_channel_correlation`, `masked_border`,
//! and per-channel GEV parameter lists `gev_shape`, `gev_location`,
//! `gev_scale` (comma-separated, one entry per channel).

use std::path::Path;

use hazardgen_core::config::KvFile;
use hazardgen_core::grid::{save_dataset, synth_dataset, SynthSpec};
use hazardgen_core::margins::GevParams;
use hazardgen_core::Error;

use crate::manifest::ManifestBuilder;
use crate::{require_file, CliError, CliResult};

pub fn parse_spec(kv: &mut KvFile) -> Result<SynthSpec, Error> {
    let channels = kv.take_usize("channels", 3)?;
    let shapes = kv
        .take_f64_list("gev_shape")?
        .unwrap_or_else(|| vec![0.1; channels]);
    let locations = kv
        .take_f64_list("gev_location")?
        .unwrap_or_else(|| vec![10.0; channels]);
    let scales = kv
        .take_f64_list("gev_scale")?
        .unwrap_or_else(|| vec![2.0; channels]);
    if shapes.len() != channels || locations.len() != channels || scales.len() != channels {
        return Err(Error::Config(format!(
            "gev parameter lists must have one entry per channel ({})",
            channels
        )));
    }
    let margins = shapes
        .iter()
        .zip(&locations)
        .zip(&scales)
        .map(|((&s, &l), &sc)| GevParams::new(s, l, sc))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SynthSpec {
        channels,
        height: kv.take_usize("height", 20)?,
        width: kv.take_usize("width", 24)?,
        days: kv.take_usize("days", 2000)?,
        correlation_length: kv.take_f64("correlation_length", 3.0)?,
        cross_channel_correlation: kv.take_f64("cross_channel_correlation", 0.5)?,
        margins,
        masked_border: kv.take_usize("masked_border", 0)?,
    })
}

pub fn run(config: &Path, out: &Path, seed: u64) -> CliResult {
    require_file(config)?;
    let mut kv = KvFile::read(config)?;
    let spec = parse_spec(&mut kv)?;
    kv.finish()?;

    let dataset = synth_dataset(&spec, seed)?;
    save_dataset(&dataset, out)?;

    let mut manifest = ManifestBuilder::new("synth");
    manifest.seed(seed);
    manifest.config("channels", spec.channels);
    manifest.config("height", spec.height);
    manifest.config("width", spec.width);
    manifest.config("days", spec.days);
    manifest.config("correlation_length", spec.correlation_length);
    manifest.config(
        "cross_channel_correlation",
        spec.cross_channel_correlation,
    );
    manifest.config("masked_border", spec.masked_border);
    manifest.input(config)?;
    manifest.output(out)?;
    manifest
        .write(&crate::manifest::sibling_manifest(out))
        .map_err(CliError::from)?;

    println!(
        "wrote {} fields of {}x{}x{} to {}",
        dataset.len(),
        spec.channels,
        spec.height,
        spec.width,
        out.display()
    );
    Ok(())
}
