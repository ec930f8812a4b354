//! `hazardgen fit`: per-pixel GEV marginals and empirical CDF tables.
//!
//! Config keys: `block_days` (default 1: fit the series as supplied).
//! Writes `model.hzgm`, the three parameter maps per channel, and a
//! manifest. Unconverged pixel-channels are listed; more than 5%
//! unconverged is a failure.

use std::path::Path;

use hazardgen_core::config::KvFile;
use hazardgen_core::grid::load_dataset;
use hazardgen_core::margins::{export_parameter_maps, FitOptions, MarginalModel};

use crate::manifest::ManifestBuilder;
use crate::{require_file, CliError, CliResult};

pub fn run(data: &Path, config: Option<&Path>, out: &Path) -> CliResult {
    require_file(data)?;
    let mut options = FitOptions::default();
    if let Some(cfg_path) = config {
        require_file(cfg_path)?;
        let mut kv = KvFile::read(cfg_path)?;
        options.block_days = kv.take_usize("block_days", 1)?;
        kv.finish()?;
    }

    let dataset = load_dataset(data)?;
    let (model, report) = MarginalModel::fit(&dataset, &options)?;

    std::fs::create_dir_all(out).map_err(hazardgen_core::Error::from)?;
    let model_path = out.join("model.hzgm");
    model.save(&model_path)?;
    let mut written = export_parameter_maps(&model, out)?;
    written.insert(0, model_path);

    let mut manifest = ManifestBuilder::new("fit");
    manifest.config("block_days", options.block_days);
    manifest.input(data)?;
    if let Some(cfg_path) = config {
        manifest.input(cfg_path)?;
    }
    manifest.outputs(&written)?;
    manifest.write(&out.join("manifest.json"))?;

    let frac = report.unconverged.len() as f64 / report.fitted as f64;
    println!(
        "fitted {} pixel-channels; {} unconverged ({:.2}%)",
        report.fitted,
        report.unconverged.len(),
        100.0 * frac
    );
    for (c, y, x) in &report.unconverged {
        println!("unconverged: channel {} pixel ({}, {})", c, y, x);
    }
    if frac > 0.05 {
        return Err(CliError::new(
            1,
            format!(
                "{:.2}% of pixel-channels failed to converge (threshold 5%)",
                100.0 * frac
            ),
        ));
    }
    Ok(())
}
