//! Central finite-difference verification of every backward pass.
//!
//! A scalar loss `L = sum(projection * output)` with a fixed random
//! projection is differentiated analytically via `backward` and
//! numerically with central differences (step 1e-5). The relative error
//! uses a small denominator floor so comparisons between near-zero
//! gradients measure against the gradient scale rather than noise:
//!
//! ```text
//! rel(a, n) = |a - n| / max(|a|, |n|, 1e-3)
//! ```

use ndarray::{Array4, ArrayD};

use crate::error::{Error, Result};
use crate::rng::RunRng;

use super::layer::LayerSpec;
use super::network::NetworkParams;
use super::tensor::Tensor4;

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Pass threshold on the relative error.
pub const FD_TOLERANCE: f64 = 1e-4;
/// Denominator floor for the relative error.
pub const FD_FLOOR: f64 = 1e-3;
/// Parameter budget; central differences need two passes per entry.
pub const MAX_CHECK_PARAMS: usize = 10_000;

#[derive(Clone, Debug)]
pub struct LayerCheck {
    pub index: usize,
    pub kind: String,
    /// Max relative error over that layer's parameter gradients.
    pub max_param_error: f64,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub layers: Vec<LayerCheck>,
    /// Max relative error over the network-input gradient.
    pub input_error: f64,
    pub max_error: f64,
    /// Comparisons skipped because the perturbation crossed a leaky-ReLU
    /// kink between the two central-difference evaluations (the loss is
    /// not differentiable there, so the comparison is undefined).
    pub kink_skips: usize,
    pub passed: bool,
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for l in &self.layers {
            writeln!(
                f,
                "layer {:>2} {:<10} max rel err {:.3e}",
                l.index, l.kind, l.max_param_error
            )?;
        }
        writeln!(f, "input gradient max rel err {:.3e}", self.input_error)?;
        writeln!(
            f,
            "overall {:.3e} ({} kink crossings skipped) -> {}",
            self.max_error,
            self.kink_skips,
            if self.passed { "PASS" } else { "FAIL" }
        )
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR)
}

/// Max relative error between two gradient arrays.
pub fn max_relative_error(analytic: &ArrayD<f64>, numeric: &ArrayD<f64>) -> f64 {
    analytic
        .iter()
        .zip(numeric.iter())
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

/// Build the network from `specs`, push a random batch through it in
/// train mode, and compare analytic gradients (parameters and input)
/// with central finite differences.
pub fn gradient_check(
    specs: &[LayerSpec],
    input_shape: (usize, usize, usize, usize),
    seed: u64,
) -> Result<GradCheckReport> {
    let rng = RunRng::new(seed);
    let (b, c, h, w) = input_shape;
    let net = NetworkParams::build(specs.to_vec(), (c, h, w), &mut rng.stream("gc-init", &[]))?;

    let n_params = net.trainable_count();
    if n_params > MAX_CHECK_PARAMS {
        return Err(Error::InvalidArgument(format!(
            "network has {} trainable parameters; gradient checking caps at {}",
            n_params, MAX_CHECK_PARAMS
        )));
    }

    // inputs nudged away from the leaky-relu kink at zero
    let mut input = Array4::zeros((b, c, h, w));
    {
        let mut s = rng.stream("gc-input", &[]);
        for v in input.iter_mut() {
            let x = s.standard_normal() * 0.5;
            *v = if x.abs() < 1e-3 { x + 2e-3 } else { x };
        }
    }
    let input = Tensor4::new(input)?;

    let out_shape = net.output_shape()?;
    let mut projection = Array4::zeros((b, out_shape.0, out_shape.1, out_shape.2));
    {
        let mut s = rng.stream("gc-projection", &[]);
        for v in projection.iter_mut() {
            *v = s.standard_normal();
        }
    }

    // the dropout stream is re-derived per call so every evaluation sees
    // identical masks; the sign pattern of every leaky-ReLU input is
    // returned so kink crossings between paired evaluations are visible
    let loss = |net: &NetworkParams, input: &Tensor4| -> Result<(f64, Vec<bool>)> {
        let mut scratch = net.clone();
        let (out, caches) = scratch.forward_train(input, &mut rng.stream("gc-dropout", &[]))?;
        let value = out
            .data()
            .iter()
            .zip(projection.iter())
            .map(|(y, p)| y * p)
            .sum();
        let mut signs = Vec::new();
        for cache in &caches {
            if let super::layer::LayerCache::LeakyRelu { input } = cache {
                signs.extend(input.iter().map(|&v| v > 0.0));
            }
        }
        Ok((value, signs))
    };

    let (d_input, d_params) = {
        let mut scratch = net.clone();
        let (_out, caches) = scratch.forward_train(&input, &mut rng.stream("gc-dropout", &[]))?;
        let upstream = Tensor4::new(projection.clone())?;
        scratch.backward(&caches, &upstream)?
    };

    let mut layers = Vec::new();
    let mut max_error = 0.0f64;
    let mut kink_skips = 0usize;
    for (li, spec) in specs.iter().enumerate() {
        let mut layer_err = 0.0f64;
        for (ai, grad) in d_params[li].iter().enumerate() {
            let len = grad.len();
            for flat in 0..len {
                let mut plus = net.clone();
                bump(&mut plus, li, ai, flat, FD_STEP);
                let (lp, signs_p) = loss(&plus, &input)?;
                let mut minus = net.clone();
                bump(&mut minus, li, ai, flat, -FD_STEP);
                let (lm, signs_m) = loss(&minus, &input)?;
                if signs_p != signs_m {
                    kink_skips += 1;
                    continue;
                }
                let numeric = (lp - lm) / (2.0 * FD_STEP);
                let a = grad.as_slice().expect("contiguous gradient")[flat];
                layer_err = layer_err.max(relative_error(a, numeric));
            }
        }
        max_error = max_error.max(layer_err);
        layers.push(LayerCheck {
            index: li,
            kind: spec.kind().to_string(),
            max_param_error: layer_err,
        });
    }

    // input gradient
    let mut input_error = 0.0f64;
    for flat in 0..input.data().len() {
        let mut plus = input.clone();
        plus.data_mut().as_slice_mut().unwrap()[flat] += FD_STEP;
        let mut minus = input.clone();
        minus.data_mut().as_slice_mut().unwrap()[flat] -= FD_STEP;
        let (lp, signs_p) = loss(&net, &plus)?;
        let (lm, signs_m) = loss(&net, &minus)?;
        if signs_p != signs_m {
            kink_skips += 1;
            continue;
        }
        let numeric = (lp - lm) / (2.0 * FD_STEP);
        let a = d_input.data().as_slice().unwrap()[flat];
        input_error = input_error.max(relative_error(a, numeric));
    }
    max_error = max_error.max(input_error);

    Ok(GradCheckReport {
        layers,
        input_error,
        max_error,
        kink_skips,
        passed: max_error < FD_TOLERANCE,
    })
}

fn bump(net: &mut NetworkParams, layer: usize, array: usize, flat: usize, delta: f64) {
    let a = &mut net.states_mut()[layer].trainable[array];
    a.as_slice_mut().expect("contiguous parameters")[flat] += delta;
}
