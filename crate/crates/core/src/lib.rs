//! Compound-hazard event generation on gridded climate fields.
//!
//! The pipeline models each pixel-channel marginal with a generalised
//! extreme value (GEV) distribution, maps data to uniform marginals with
//! the probability integral transform, learns the joint dependence
//! structure of the uniform fields with a deep-convolutional GAN trained
//! from scratch, and evaluates generated events against held-out data
//! with extremal-coefficient and correlation diagnostics.
//!
//! Modules:
//! - [`grid`]: gridded datasets, the HZG file format, temporal and
//!   spatial aggregation, synthetic fixtures with known dependence.
//! - [`margins`]: GEV distribution functions, maximum-likelihood
//!   fitting, the probability integral transform and its inverse.
//! - [`nn`]: a minimal differentiable-layer engine (dense, conv,
//!   transposed conv, batchnorm, dropout, leaky ReLU, sigmoid) with
//!   Adam and finite-difference gradient checking.
//! - [`gan`]: generator/discriminator architectures, adversarial
//!   losses with label smoothing, the training loop, and sampling.
//! - [`diag`]: extremal coefficients, extremal and Pearson
//!   correlations, Q-Q comparison vectors, and report serialisation.

pub mod config;
pub mod diag;
pub mod error;
pub mod gan;
pub mod grid;
pub mod margins;
pub mod nn;
pub mod rng;

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Cap the global worker pool used for per-pixel and per-batch
/// parallelism. Safe to call more than once; only the first call has an
/// effect. Results never depend on the thread count.
pub fn set_max_threads(threads: usize) {
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
}
