//! `hazardgen sweep`: uniform random search over the tuned
//! hyperparameter ranges. Each trial is a short training run followed
//! by the generated-vs-test pairwise-coefficient RMSE; trials that
//! crash are recorded and the sweep continues.
//!
//! Config keys: `budget`, `epochs`, `batch_size`, `sample_count`,
//! `seed_set`, `learning_rate` (range `lo..hi`), `beta_1`, `lrelu`,
//! `dropout`, `training_balance` (set), `label_smoothing`.

use std::io::Write;
use std::path::Path;

use hazardgen_core::config::KvFile;
use hazardgen_core::diag::pairwise_theta_rmse;
use hazardgen_core::gan::{self, TrainConfig};
use hazardgen_core::grid::{load_dataset, Dataset, SplitTag};
use hazardgen_core::margins::MarginalModel;
use hazardgen_core::rng::RunRng;
use hazardgen_core::Error;

use crate::commands::specs_for;
use crate::manifest::ManifestBuilder;
use crate::{require_file, CliError, CliResult};

/// Tuned search bounds; configured ranges must stay inside them.
const LEARNING_RATE_BOUNDS: (f64, f64) = (0.0001, 0.0003);
const BETA_1_BOUNDS: (f64, f64) = (0.1, 0.5);
const LRELU_BOUNDS: (f64, f64) = (0.1, 0.4);
const DROPOUT_BOUNDS: (f64, f64) = (0.3, 0.6);
const SEED_SET: [u64; 6] = [0, 1, 2, 6, 7, 42];
const BALANCE_SET: [u64; 2] = [1, 2];

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub budget: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub sample_count: Option<usize>,
    pub seed_set: Vec<u64>,
    pub learning_rate: (f64, f64),
    pub beta_1: (f64, f64),
    pub lrelu: (f64, f64),
    pub dropout: (f64, f64),
    pub training_balance: Vec<u64>,
    pub label_smoothing: f64,
}

impl SweepSpec {
    pub fn from_kv(mut kv: KvFile) -> Result<Self, Error> {
        let spec = Self {
            budget: kv.take_usize("budget", 5)?,
            epochs: kv.take_usize("epochs", 20)?,
            batch_size: kv.take_usize("batch_size", 50)?,
            sample_count: match kv.take_raw("sample_count") {
                Some(v) => Some(v.parse().map_err(|_| {
                    Error::Config(format!("sample_count: not an integer: {:?}", v))
                })?),
                None => None,
            },
            seed_set: kv.take_u64_list("seed_set")?.unwrap_or_else(|| SEED_SET.to_vec()),
            learning_rate: kv.take_range("learning_rate", LEARNING_RATE_BOUNDS)?,
            beta_1: kv.take_range("beta_1", BETA_1_BOUNDS)?,
            lrelu: kv.take_range("lrelu", LRELU_BOUNDS)?,
            dropout: kv.take_range("dropout", DROPOUT_BOUNDS)?,
            training_balance: kv
                .take_u64_list("training_balance")?
                .unwrap_or_else(|| BALANCE_SET.to_vec()),
            label_smoothing: kv.take_f64("label_smoothing", 0.9)?,
        };
        kv.finish()?;
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), Error> {
        let inside = |name: &str, range: (f64, f64), bounds: (f64, f64)| {
            if range.0 < bounds.0 || range.1 > bounds.1 {
                Err(Error::Config(format!(
                    "{} range {}..{} outside the tuned bounds {}..{}",
                    name, range.0, range.1, bounds.0, bounds.1
                )))
            } else {
                Ok(())
            }
        };
        if self.budget == 0 {
            return Err(Error::Config("budget must be >= 1".into()));
        }
        inside("learning_rate", self.learning_rate, LEARNING_RATE_BOUNDS)?;
        inside("beta_1", self.beta_1, BETA_1_BOUNDS)?;
        inside("lrelu", self.lrelu, LRELU_BOUNDS)?;
        inside("dropout", self.dropout, DROPOUT_BOUNDS)?;
        for s in &self.seed_set {
            if !SEED_SET.contains(s) {
                return Err(Error::Config(format!(
                    "seed {} not in the tuned seed set {:?}",
                    s, SEED_SET
                )));
            }
        }
        for b in &self.training_balance {
            if !BALANCE_SET.contains(b) {
                return Err(Error::Config(format!(
                    "training_balance {} not in {:?}",
                    b, BALANCE_SET
                )));
            }
        }
        if self.seed_set.is_empty() || self.training_balance.is_empty() {
            return Err(Error::Config("seed_set and training_balance must be non-empty".into()));
        }
        Ok(())
    }

    /// Sample one trial configuration.
    fn draw(&self, rng: &RunRng, trial: usize) -> TrainConfig {
        let mut s = rng.stream("sweep-trial", &[trial as u64]);
        TrainConfig {
            seed: *s.pick(&self.seed_set),
            learning_rate: s.uniform_in(self.learning_rate.0, self.learning_rate.1),
            beta_1: s.uniform_in(self.beta_1.0, self.beta_1.1),
            lrelu: s.uniform_in(self.lrelu.0, self.lrelu.1),
            dropout: s.uniform_in(self.dropout.0, self.dropout.1),
            training_balance: *s.pick(&self.training_balance) as usize,
            epochs: self.epochs,
            batch_size: self.batch_size,
            label_smoothing: self.label_smoothing,
        }
    }
}

struct Trial {
    index: usize,
    cfg: TrainConfig,
    status: String,
    objective: f64,
}

fn run_trial(
    spec: &SweepSpec,
    cfg: &TrainConfig,
    uniforms: &Dataset,
    test_u: &Dataset,
    model: &MarginalModel,
) -> Result<f64, Error> {
    let (c, h, w) = uniforms.field_shape();
    let (gspec, dspec) = specs_for(c, h, w, cfg);
    let result = gan::train(uniforms, &gspec, &dspec, cfg, |_, _, _| Ok(()))?;
    let count = spec.sample_count.unwrap_or(test_u.len());
    let sampled = gan::sample_events(&result.generator, count, cfg.seed)?;
    let sampled = Dataset::from_values(
        sampled.values().clone(),
        model.channel_names().to_vec(),
        model.valid_mask().clone(),
        sampled.cadence(),
        SplitTag::Generated,
    )?;
    pairwise_theta_rmse(&sampled, test_u)
}

pub fn run(
    data: &Path,
    test: &Path,
    model_path: &Path,
    config: &Path,
    seed_override: Option<u64>,
    out: &Path,
) -> CliResult {
    for path in [data, test, model_path, config] {
        require_file(path)?;
    }
    let spec = SweepSpec::from_kv(KvFile::read(config)?)?;
    let draw_seed = seed_override.unwrap_or(0);

    let model = MarginalModel::load(model_path)?;
    let train_ds = load_dataset(data)?;
    let test_ds = load_dataset(test)?.with_split_tag(SplitTag::Test);
    let uniforms = model.pit(&train_ds)?;
    let test_u = model.pit(&test_ds)?;

    let rng = RunRng::new(draw_seed);
    let mut trials = Vec::with_capacity(spec.budget);
    for i in 0..spec.budget {
        let cfg = spec.draw(&rng, i);
        let (status, objective) = match run_trial(&spec, &cfg, &uniforms, &test_u, &model) {
            Ok(obj) => ("ok".to_string(), obj),
            Err(e) => (format!("error: {}", e), f64::NAN),
        };
        println!(
            "trial {}: seed={} lr={:.6e} beta_1={:.4} lrelu={:.4} dropout={:.4} balance={} -> {} ({})",
            i,
            cfg.seed,
            cfg.learning_rate,
            cfg.beta_1,
            cfg.lrelu,
            cfg.dropout,
            cfg.training_balance,
            objective,
            status
        );
        trials.push(Trial {
            index: i,
            cfg,
            status,
            objective,
        });
    }

    // rank by objective, failed trials last
    trials.sort_by(|a, b| match (a.objective.is_nan(), b.objective.is_nan()) {
        (true, true) => a.index.cmp(&b.index),
        (true, false) => std::cmp::Ordering::Greater,
        (false, true) => std::cmp::Ordering::Less,
        (false, false) => a
            .objective
            .partial_cmp(&b.objective)
            .unwrap_or(std::cmp::Ordering::Equal),
    });

    std::fs::create_dir_all(out).map_err(Error::from)?;
    let trials_path = out.join("trials.csv");
    {
        let mut f = std::io::BufWriter::new(
            std::fs::File::create(&trials_path).map_err(Error::from)?,
        );
        writeln!(
            f,
            "rank,trial,seed,learning_rate,beta_1,lrelu,dropout,training_balance,objective,status"
        )
        .map_err(Error::from)?;
        for (rank, t) in trials.iter().enumerate() {
            writeln!(
                f,
                "{},{},{},{},{},{},{},{},{},{}",
                rank,
                t.index,
                t.cfg.seed,
                t.cfg.learning_rate,
                t.cfg.beta_1,
                t.cfg.lrelu,
                t.cfg.dropout,
                t.cfg.training_balance,
                t.objective,
                t.status.replace(',', ";")
            )
            .map_err(Error::from)?;
        }
    }

    let best = trials
        .first()
        .filter(|t| !t.objective.is_nan())
        .ok_or_else(|| CliError::new(1, "every sweep trial failed"))?;
    let best_path = out.join("best_config.cfg");
    std::fs::write(&best_path, best.cfg.to_kv_string()).map_err(Error::from)?;

    let mut manifest = ManifestBuilder::new("sweep");
    manifest.seed(draw_seed);
    manifest.config("budget", spec.budget);
    manifest.config("epochs", spec.epochs);
    manifest.config("batch_size", spec.batch_size);
    for path in [data, test, model_path, config] {
        manifest.input(path)?;
    }
    manifest.outputs(&[trials_path, best_path])?;
    manifest.write(&out.join("manifest.json"))?;

    println!(
        "best trial {} with objective {} (seed {})",
        best.index, best.objective, best.cfg.seed
    );
    Ok(())
}
