//! Maximum-likelihood GEV fitting.

use crate::error::{Error, Result};

use super::gev::GevParams;
use super::simplex::{minimize, SimplexOptions};

/// Minimum sample size accepted by [`fit_gev`].
pub const MIN_SAMPLES: usize = 30;

#[derive(Clone, Copy, Debug)]
pub struct GevFit {
    pub params: GevParams,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Fit a GEV by maximising the log-likelihood with a Nelder-Mead search
/// over `(ξ, μ, log σ)` from a moment-based Gumbel initialisation.
pub fn fit_gev(samples: &[f64]) -> Result<GevFit> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "need at least {} samples to fit a GEV, got {}",
            MIN_SAMPLES,
            samples.len()
        )));
    }
    if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("sample value {}", bad)));
    }
    let n = samples.len() as f64;
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Err(Error::Degenerate("all samples equal".into()));
    }
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);

    // Gumbel moment estimates: sd = sigma * pi / sqrt(6), mean = mu + gamma * sigma
    let sigma0 = var.sqrt() * 6.0f64.sqrt() / std::f64::consts::PI;
    let mu0 = mean - 0.577_215_664_901_532_9 * sigma0;
    let mut xi0 = 0.1;
    if GevParams::new(xi0, mu0, sigma0)?.log_likelihood(samples) == f64::NEG_INFINITY {
        xi0 = 0.0; // Gumbel start is feasible for any finite sample
    }

    let objective = |p: &[f64]| -> f64 {
        let (xi, mu, log_sigma) = (p[0], p[1], p[2]);
        if !xi.is_finite() || !mu.is_finite() || !log_sigma.is_finite() || log_sigma.abs() > 700.0 {
            return f64::INFINITY;
        }
        match GevParams::new(xi, mu, log_sigma.exp()) {
            Ok(params) => -params.log_likelihood(samples),
            Err(_) => f64::INFINITY,
        }
    };

    let result = minimize(
        objective,
        &[xi0, mu0, sigma0.ln()],
        &[0.1, 0.5 * sigma0, 0.25],
        &SimplexOptions::default(),
    );

    let params = GevParams::new(result.x[0], result.x[1], result.x[2].exp())?;
    let log_likelihood = -result.value;
    if !log_likelihood.is_finite() {
        return Err(Error::Degenerate(
            "likelihood did not become finite during fitting".into(),
        ));
    }
    Ok(GevFit {
        params,
        log_likelihood,
        converged: result.converged,
        iterations: result.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RunRng;

    fn simulate(params: &GevParams, n: usize, seed: u64) -> Vec<f64> {
        let mut s = RunRng::new(seed).stream("gev-sim", &[]);
        (0..n)
            .map(|_| params.quantile(s.open_uniform()).unwrap())
            .collect()
    }

    #[test]
    fn recovers_parameters_from_large_sample() {
        let truth = GevParams::new(0.2, 10.0, 2.0).unwrap();
        let xs = simulate(&truth, 10_000, 17);
        let fit = fit_gev(&xs).unwrap();
        assert!(fit.converged);
        assert!((fit.params.shape() - 0.2).abs() < 0.05, "xi {}", fit.params.shape());
        assert!((fit.params.location() - 10.0).abs() < 0.1, "mu {}", fit.params.location());
        assert!((fit.params.scale() - 2.0).abs() < 0.1, "sigma {}", fit.params.scale());
    }

    #[test]
    fn gumbel_data_yields_near_zero_shape() {
        let truth = GevParams::new(0.0, 5.0, 1.5).unwrap();
        let xs = simulate(&truth, 10_000, 23);
        let fit = fit_gev(&xs).unwrap();
        assert!(fit.params.shape().abs() < 0.05, "xi {}", fit.params.shape());
    }

    #[test]
    fn estimate_is_at_least_as_likely_as_truth() {
        let truth = GevParams::new(0.15, 3.0, 0.8).unwrap();
        let xs = simulate(&truth, 2_000, 31);
        let fit = fit_gev(&xs).unwrap();
        assert!(fit.log_likelihood >= truth.log_likelihood(&xs) - 1e-6);
    }

    #[test]
    fn small_samples_rejected() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(matches!(fit_gev(&xs), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn degenerate_samples_rejected() {
        let xs = vec![4.2; 100];
        assert!(matches!(fit_gev(&xs), Err(Error::Degenerate(_))));
    }

    #[test]
    fn bounded_tail_data_is_fit() {
        let truth = GevParams::new(-0.3, 0.0, 1.0).unwrap();
        let xs = simulate(&truth, 5_000, 41);
        let fit = fit_gev(&xs).unwrap();
        assert!((fit.params.shape() + 0.3).abs() < 0.07, "xi {}", fit.params.shape());
    }
}
