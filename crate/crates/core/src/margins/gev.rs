//! Generalised extreme value distribution.
//!
//! Parameterised by shape ξ, location μ and scale σ > 0:
//!
//! ```text
//! F(x) = exp(-t(x)),  t(x) = (1 + ξ (x-μ)/σ)^(-1/ξ)   ξ ≠ 0
//!                     t(x) = exp(-(x-μ)/σ)             ξ = 0
//! ```
//!
//! ξ > 0 gives a heavy upper tail bounded below at μ - σ/ξ; ξ < 0 a
//! tail bounded above at μ - σ/ξ; ξ = 0 is the Gumbel limit. Shapes
//! with |ξ| below [`GUMBEL_SHAPE_EPS`] take the Gumbel branch to avoid
//! cancellation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shapes closer to zero than this are treated as Gumbel.
pub const GUMBEL_SHAPE_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GevParams {
    shape: f64,
    location: f64,
    scale: f64,
}

impl GevParams {
    pub fn new(shape: f64, location: f64, scale: f64) -> Result<Self> {
        if !shape.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite shape {}", shape)));
        }
        if !location.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "non-finite location {}",
                location
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "scale must be positive and finite, got {}",
                scale
            )));
        }
        Ok(Self { shape, location, scale })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn location(&self) -> f64 {
        self.location
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn is_gumbel(&self) -> bool {
        self.shape.abs() < GUMBEL_SHAPE_EPS
    }

    /// Support as a `(lower, upper)` interval; unbounded ends are
    /// infinite.
    pub fn support(&self) -> (f64, f64) {
        if self.is_gumbel() {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else if self.shape > 0.0 {
            (self.location - self.scale / self.shape, f64::INFINITY)
        } else {
            (f64::NEG_INFINITY, self.location - self.scale / self.shape)
        }
    }

    /// Distribution function; clamps to 0/1 outside the support.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x.is_nan() {
            return Err(Error::InvalidArgument("cdf of NaN".into()));
        }
        let z = (x - self.location) / self.scale;
        let t = if self.is_gumbel() {
            (-z).exp()
        } else {
            let s = 1.0 + self.shape * z;
            if s <= 0.0 {
                return Ok(if self.shape > 0.0 { 0.0 } else { 1.0 });
            }
            s.powf(-1.0 / self.shape)
        };
        Ok((-t).exp())
    }

    /// Quantile (probability point) function, the exact inverse of
    /// [`GevParams::cdf`] on the interior of the support.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "quantile argument must lie in (0, 1), got {}",
                u
            )));
        }
        Ok(self.quantile_unchecked(u))
    }

    /// Quantile without the domain check; `u` must lie in (0, 1).
    pub(crate) fn quantile_unchecked(&self, u: f64) -> f64 {
        let y = -u.ln();
        if self.is_gumbel() {
            self.location - self.scale * y.ln()
        } else {
            self.location + self.scale * (y.powf(-self.shape) - 1.0) / self.shape
        }
    }

    /// Log-density at `x`; `-inf` outside the support.
    pub fn log_density(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.scale;
        if self.is_gumbel() {
            -self.scale.ln() - z - (-z).exp()
        } else {
            let s = 1.0 + self.shape * z;
            if s <= 0.0 {
                return f64::NEG_INFINITY;
            }
            -self.scale.ln() - (1.0 + 1.0 / self.shape) * s.ln() - s.powf(-1.0 / self.shape)
        }
    }

    /// Log-likelihood of a sample; `-inf` if any point violates the
    /// validity constraint `1 + ξ (x-μ)/σ > 0`.
    pub fn log_likelihood(&self, samples: &[f64]) -> f64 {
        let mut ll = 0.0;
        for &x in samples {
            let l = self.log_density(x);
            if l == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            ll += l;
        }
        ll
    }
}
