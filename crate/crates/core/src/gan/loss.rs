//! Adversarial cross-entropy losses with label smoothing.
//!
//! The discriminator minimises binary cross-entropy against smoothed
//! real labels and zero fake labels:
//!
//! ```text
//! d_loss = -mean[ s * ln(d_real) + ln(1 - d_fake) ]
//! ```
//!
//! The generator uses the non-saturating form `-mean[ ln(d_fake) ]`.
//! Probabilities are clamped to `[EPS, 1-EPS]` before any logarithm.

use crate::error::{Error, Result};

/// Probability clamp inside the losses.
pub const EPS: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GanLosses {
    pub d_loss: f64,
    pub g_loss: f64,
}

fn clamp(p: f64) -> f64 {
    p.clamp(EPS, 1.0 - EPS)
}

/// Both losses for one batch of discriminator outputs.
pub fn gan_losses(d_real: &[f64], d_fake: &[f64], smoothing: f64) -> Result<GanLosses> {
    if d_real.is_empty() || d_fake.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if d_real.len() != d_fake.len() {
        return Err(Error::Shape(format!(
            "{} real outputs vs {} fake outputs",
            d_real.len(),
            d_fake.len()
        )));
    }
    if !(smoothing > 0.5 && smoothing <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "label smoothing must lie in (0.5, 1], got {}",
            smoothing
        )));
    }
    let n = d_real.len() as f64;
    let mut d_loss = 0.0;
    for (&pr, &pf) in d_real.iter().zip(d_fake) {
        d_loss -= smoothing * clamp(pr).ln() + (1.0 - clamp(pf)).ln();
    }
    let g_loss = -d_fake.iter().map(|&p| clamp(p).ln()).sum::<f64>() / n;
    Ok(GanLosses {
        d_loss: d_loss / n,
        g_loss,
    })
}

/// Gradients of `d_loss` with respect to each probability.
pub fn d_loss_grads(d_real: &[f64], d_fake: &[f64], smoothing: f64) -> (Vec<f64>, Vec<f64>) {
    let n = d_real.len() as f64;
    let real = d_real.iter().map(|&p| -smoothing / (n * clamp(p))).collect();
    let fake = d_fake.iter().map(|&p| 1.0 / (n * (1.0 - clamp(p)))).collect();
    (real, fake)
}

/// Gradient of the non-saturating generator loss with respect to the
/// discriminator output on fakes.
pub fn g_loss_grads(d_fake: &[f64]) -> Vec<f64> {
    let n = d_fake.len() as f64;
    d_fake.iter().map(|&p| -1.0 / (n * clamp(p))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hand_computed_value() {
        // d_real = 0.9, d_fake = 0.1, smoothing 0.9:
        // -(0.9 ln 0.9 + ln 0.9) = -1.9 ln 0.9 = 0.2002 (4 d.p.)
        let l = gan_losses(&[0.9; 4], &[0.1; 4], 0.9).unwrap();
        assert_abs_diff_eq!(l.d_loss, -1.9 * 0.9f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(l.d_loss, 0.2002, epsilon = 5e-5);
    }

    #[test]
    fn generator_loss_at_half_is_ln_two() {
        let l = gan_losses(&[0.5; 3], &[0.5; 3], 0.9).unwrap();
        assert_abs_diff_eq!(l.g_loss, 2.0f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn generator_loss_decreases_as_fakes_fool() {
        let mut prev = f64::INFINITY;
        for df in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let l = gan_losses(&[0.8; 2], &[df; 2], 0.9).unwrap();
            assert!(l.g_loss < prev);
            prev = l.g_loss;
        }
    }

    #[test]
    fn empty_batch_rejected() {
        assert!(gan_losses(&[], &[], 0.9).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let d_real = [0.8, 0.6, 0.95];
        let d_fake = [0.2, 0.45, 0.7];
        let s = 0.9;
        let h = 1e-7;
        let (gr, gf) = d_loss_grads(&d_real, &d_fake, s);
        let gg = g_loss_grads(&d_fake);
        for i in 0..3 {
            let mut plus = d_real;
            plus[i] += h;
            let mut minus = d_real;
            minus[i] -= h;
            let num = (gan_losses(&plus, &d_fake, s).unwrap().d_loss
                - gan_losses(&minus, &d_fake, s).unwrap().d_loss)
                / (2.0 * h);
            assert_abs_diff_eq!(gr[i], num, epsilon = 1e-5);

            let mut plus = d_fake;
            plus[i] += h;
            let mut minus = d_fake;
            minus[i] -= h;
            let num_d = (gan_losses(&d_real, &plus, s).unwrap().d_loss
                - gan_losses(&d_real, &minus, s).unwrap().d_loss)
                / (2.0 * h);
            assert_abs_diff_eq!(gf[i], num_d, epsilon = 1e-5);
            let num_g = (gan_losses(&d_real, &plus, s).unwrap().g_loss
                - gan_losses(&d_real, &minus, s).unwrap().g_loss)
                / (2.0 * h);
            assert_abs_diff_eq!(gg[i], num_g, epsilon = 1e-5);
        }
    }

    #[test]
    fn probabilities_at_extremes_stay_finite() {
        let l = gan_losses(&[0.0, 1.0], &[0.0, 1.0], 0.9).unwrap();
        assert!(l.d_loss.is_finite() && l.g_loss.is_finite());
    }
}
