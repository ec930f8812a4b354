//! `hazardgen diagnose`: dependence report comparing train, test and
//! generated datasets.

use std::path::Path;

use hazardgen_core::diag::compare_sets;
use hazardgen_core::grid::{load_dataset, Dataset, SplitTag};
use hazardgen_core::margins::MarginalModel;

use crate::manifest::ManifestBuilder;
use crate::{require_file, CliResult, GeneratedScale};

pub fn run(
    train: &Path,
    test: &Path,
    generated: &Path,
    model_path: &Path,
    generated_scale: GeneratedScale,
    out: &Path,
) -> CliResult {
    for path in [train, test, generated, model_path] {
        require_file(path)?;
    }
    let model = MarginalModel::load(model_path)?;
    let train_ds = load_dataset(train)?;
    let test_ds = load_dataset(test)?.with_split_tag(SplitTag::Test);
    let generated_ds = load_dataset(generated)?.with_split_tag(SplitTag::Generated);

    // compare_sets expects the generated set on the uniform scale
    let generated_u: Dataset = match generated_scale {
        GeneratedScale::Original => model.pit(&generated_ds)?,
        GeneratedScale::Uniform => generated_ds,
    };

    let report = compare_sets(&train_ds, &test_ds, &generated_u, &model)?;
    let written = report.save(out)?;

    let mut manifest = ManifestBuilder::new("diagnose");
    manifest.config(
        "generated_scale",
        match generated_scale {
            GeneratedScale::Original => "original",
            GeneratedScale::Uniform => "uniform",
        },
    );
    for path in [train, test, generated, model_path] {
        manifest.input(path)?;
    }
    manifest.outputs(&written)?;
    manifest.write(&out.join("manifest.json"))?;

    let s = &report.summary;
    println!(
        "pixels={} pairs={} | pooled theta RMSE: generated-vs-test {:.4}, train-vs-test {:.4} | mean theta bias (generated - test) {:+.4}",
        s.pixels,
        s.pairs,
        s.pooled_theta_rmse_generated_vs_test,
        s.pooled_theta_rmse_train_vs_test,
        s.mean_theta_generated_minus_test
    );
    Ok(())
}
