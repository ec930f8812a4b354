//! Training configuration: a flat `key=value` file.
//!
//! Recognised keys: `seed`, `learning_rate`, `beta_1`, `lrelu`,
//! `dropout`, `training_balance`, `epochs`, `batch_size`,
//! `label_smoothing`. Unknown keys are errors. Missing keys take the
//! tuned defaults below.

use std::path::Path;

use crate::config::KvFile;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub seed: u64,
    pub learning_rate: f64,
    pub beta_1: f64,
    pub lrelu: f64,
    pub dropout: f64,
    pub training_balance: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub label_smoothing: f64,
}

impl Default for TrainConfig {
    /// Tuned selections from the hyperparameter sweep, with the
    /// training run sized as in the headline experiment.
    fn default() -> Self {
        Self {
            seed: 7,
            learning_rate: 0.00013367626823798716,
            beta_1: 0.22693882275467836,
            lrelu: 0.2991161912395133,
            dropout: 0.44053850596844424,
            training_balance: 2,
            epochs: 1000,
            batch_size: 50,
            label_smoothing: 0.9,
        }
    }
}

impl TrainConfig {
    pub fn from_kv(mut kv: KvFile) -> Result<Self> {
        let d = Self::default();
        let cfg = Self {
            seed: kv.take_u64("seed", d.seed)?,
            learning_rate: kv.take_f64("learning_rate", d.learning_rate)?,
            beta_1: kv.take_f64("beta_1", d.beta_1)?,
            lrelu: kv.take_f64("lrelu", d.lrelu)?,
            dropout: kv.take_f64("dropout", d.dropout)?,
            training_balance: kv.take_usize("training_balance", d.training_balance)?,
            epochs: kv.take_usize("epochs", d.epochs)?,
            batch_size: kv.take_usize("batch_size", d.batch_size)?,
            label_smoothing: kv.take_f64("label_smoothing", d.label_smoothing)?,
        };
        kv.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_kv(KvFile::read(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_kv(KvFile::parse(text)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.training_balance == 0 {
            return bad("training_balance must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.beta_1) {
            return bad(format!("beta_1 must lie in [0, 1), got {}", self.beta_1));
        }
        if !(self.lrelu > 0.0 && self.lrelu < 1.0) {
            return bad(format!("lrelu must lie in (0, 1), got {}", self.lrelu));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if !(self.label_smoothing > 0.5 && self.label_smoothing <= 1.0) {
            return bad(format!(
                "label_smoothing must lie in (0.5, 1], got {}",
                self.label_smoothing
            ));
        }
        Ok(())
    }

    /// Canonical `key=value` rendering, parseable by [`TrainConfig::parse`].
    pub fn to_kv_string(&self) -> String {
        format!(
            "seed={}\nlearning_rate={}\nbeta_1={}\nlrelu={}\ndropout={}\ntraining_balance={}\nepochs={}\nbatch_size={}\nlabel_smoothing={}\n",
            self.seed,
            self.learning_rate,
            self.beta_1,
            self.lrelu,
            self.dropout,
            self.training_balance,
            self.epochs,
            self.batch_size,
            self.label_smoothing
        )
    }
}
