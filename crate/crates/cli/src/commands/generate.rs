//! `hazardgen generate`: sample uniform events from a generator
//! checkpoint and map them back to the data scale through the fitted
//! GEV quantile functions.

use std::path::Path;

use hazardgen_core::gan::sample_events;
use hazardgen_core::grid::save_dataset;
use hazardgen_core::margins::MarginalModel;
use hazardgen_core::nn::load_network;
use hazardgen_core::Error;

use crate::manifest::{sibling_manifest, ManifestBuilder};
use crate::{require_file, CliError, CliResult};

pub fn run(checkpoint: &Path, model_path: &Path, count: usize, seed: u64, out: &Path) -> CliResult {
    require_file(checkpoint)?;
    require_file(model_path)?;

    let generator = load_network(checkpoint)?;
    let model = MarginalModel::load(model_path)?;
    let out_shape = generator.output_shape()?;
    if out_shape != model.field_shape() {
        return Err(CliError::from(Error::Shape(format!(
            "checkpoint emits {:?} but the marginal model covers {:?}",
            out_shape,
            model.field_shape()
        ))));
    }

    let uniforms = sample_events(&generator, count, seed)?;
    // rank-scale events carry the model's no-data mask once on data scale
    let uniforms = hazardgen_core::grid::Dataset::from_values(
        uniforms.values().clone(),
        model.channel_names().to_vec(),
        model.valid_mask().clone(),
        uniforms.cadence(),
        uniforms.split_tag(),
    )?;
    let events = model.inverse_pit(&uniforms)?;
    save_dataset(&events, out)?;

    let mut manifest = ManifestBuilder::new("generate");
    manifest.seed(seed);
    manifest.config("count", count);
    manifest.input(checkpoint)?;
    manifest.input(model_path)?;
    manifest.output(out)?;
    manifest.write(&sibling_manifest(out))?;

    println!("wrote {} generated events to {}", count, out.display());
    Ok(())
}
