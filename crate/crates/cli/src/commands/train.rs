//! `hazardgen train`: transform to uniform marginals and run the
//! adversarial loop. Writes checkpoints, the loss history, an
//! architecture audit, and a manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use hazardgen_core::gan::{
    self, TrainConfig, REFERENCE_DISCRIMINATOR_TOTAL, REFERENCE_DISCRIMINATOR_TRAINABLE,
    REFERENCE_GENERATOR_TRAINABLE,
};
use hazardgen_core::grid::load_dataset;
use hazardgen_core::margins::MarginalModel;
use hazardgen_core::nn::{save_network, NetworkAudit};

use crate::commands::specs_for;
use crate::manifest::ManifestBuilder;
use crate::{require_file, CliResult};

/// Audit table with the published totals of the reference architecture
/// alongside; the filter/stride/padding assignment here is solved from
/// the shape chain, so differing counts are expected and printed, not
/// hidden.
pub fn audit_text(generator: &NetworkAudit, discriminator: &NetworkAudit) -> String {
    let mut s = String::new();
    s.push_str(&generator.to_string());
    s.push_str(&format!(
        "reference generator trainable: {} (achieved {}, difference {})\n\n",
        REFERENCE_GENERATOR_TRAINABLE,
        generator.trainable,
        generator.trainable as i64 - REFERENCE_GENERATOR_TRAINABLE as i64
    ));
    s.push_str(&discriminator.to_string());
    s.push_str(&format!(
        "reference discriminator total: {} trainable: {} (achieved {} / {}, difference {} / {})\n",
        REFERENCE_DISCRIMINATOR_TOTAL,
        REFERENCE_DISCRIMINATOR_TRAINABLE,
        discriminator.trainable + discriminator.non_trainable,
        discriminator.trainable,
        (discriminator.trainable + discriminator.non_trainable) as i64
            - REFERENCE_DISCRIMINATOR_TOTAL as i64,
        discriminator.trainable as i64 - REFERENCE_DISCRIMINATOR_TRAINABLE as i64
    ));
    s
}

pub fn run(
    data: &Path,
    model_path: &Path,
    config: Option<&Path>,
    seed_override: Option<u64>,
    out: &Path,
) -> CliResult {
    require_file(data)?;
    require_file(model_path)?;
    let mut cfg = match config {
        Some(path) => {
            require_file(path)?;
            TrainConfig::from_file(path)?
        }
        None => TrainConfig::default(),
    };
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }

    let dataset = load_dataset(data)?;
    let model = MarginalModel::load(model_path)?;
    let uniforms = model.pit(&dataset)?;

    let (c, h, w) = dataset.field_shape();
    let (gspec, dspec) = specs_for(c, h, w, &cfg);

    std::fs::create_dir_all(out).map_err(hazardgen_core::Error::from)?;
    let mut written: Vec<PathBuf> = Vec::new();

    // architecture audit before training starts
    {
        let generator = gan::build_generator(&gspec, cfg.seed)?;
        let discriminator = gan::build_discriminator(&dspec, cfg.seed)?;
        let text = audit_text(
            &generator.audit("generator")?,
            &discriminator.audit("discriminator")?,
        );
        print!("{}", text);
        let path = out.join("audit.txt");
        std::fs::write(&path, text).map_err(hazardgen_core::Error::from)?;
        written.push(path);
    }

    let mut checkpoint_paths: Vec<PathBuf> = Vec::new();
    let result = gan::train(&uniforms, &gspec, &dspec, &cfg, |epoch, generator, disc| {
        let gen_path = out.join(format!("checkpoint_gen_epoch{:05}.hzgw", epoch));
        let disc_path = out.join(format!("checkpoint_disc_epoch{:05}.hzgw", epoch));
        save_network(generator, &gen_path)?;
        save_network(disc, &disc_path)?;
        checkpoint_paths.push(gen_path);
        checkpoint_paths.push(disc_path);
        Ok(())
    })?;
    written.extend(checkpoint_paths);

    let gen_final = out.join("checkpoint_gen_final.hzgw");
    let disc_final = out.join("checkpoint_disc_final.hzgw");
    save_network(&result.generator, &gen_final)?;
    save_network(&result.discriminator, &disc_final)?;
    written.push(gen_final);
    written.push(disc_final);

    let losses_path = out.join("losses.csv");
    {
        let mut f = std::io::BufWriter::new(
            std::fs::File::create(&losses_path).map_err(hazardgen_core::Error::from)?,
        );
        writeln!(f, "epoch,d_loss,g_loss").map_err(hazardgen_core::Error::from)?;
        for e in &result.history {
            writeln!(f, "{},{},{}", e.epoch, e.d_loss, e.g_loss)
                .map_err(hazardgen_core::Error::from)?;
        }
    }
    written.push(losses_path);

    let config_path = out.join("used_config.txt");
    std::fs::write(&config_path, cfg.to_kv_string()).map_err(hazardgen_core::Error::from)?;
    written.push(config_path);

    let mut manifest = ManifestBuilder::new("train");
    manifest.seed(cfg.seed);
    for (key, value) in [
        ("learning_rate", cfg.learning_rate.to_string()),
        ("beta_1", cfg.beta_1.to_string()),
        ("lrelu", cfg.lrelu.to_string()),
        ("dropout", cfg.dropout.to_string()),
        ("training_balance", cfg.training_balance.to_string()),
        ("epochs", cfg.epochs.to_string()),
        ("batch_size", cfg.batch_size.to_string()),
        ("label_smoothing", cfg.label_smoothing.to_string()),
    ] {
        manifest.config(key, value);
    }
    manifest.input(data)?;
    manifest.input(model_path)?;
    if let Some(cfg_path) = config {
        manifest.input(cfg_path)?;
    }
    manifest.outputs(&written)?;
    manifest.write(&out.join("manifest.json"))?;

    if let Some(last) = result.history.last() {
        println!(
            "trained {} epochs; final d_loss {:.4}, g_loss {:.4}",
            result.history.len(),
            last.d_loss,
            last.g_loss
        );
    } else {
        println!("trained 0 epochs; wrote initial checkpoint");
    }
    Ok(())
}
