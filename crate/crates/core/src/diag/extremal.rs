//! Extremal coefficient and extremal correlation estimators.
//!
//! For D unit-Fréchet components observed over N samples the extremal
//! coefficient is estimated by
//!
//! ```text
//! theta = N / sum_n min_i (1 / Y_ni)
//! ```
//!
//! and ranges over [1, D]: 1 is total dependence, D independence. The
//! pairwise extremal correlation is `chi = 2 - theta`, the extreme
//! analogue of a correlation coefficient on [0, 1].

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Dataset;
use crate::margins::to_frechet;

/// Raw and range-clamped estimate; finite samples can leave `[1, D]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtremalCoefficient {
    pub raw: f64,
    pub clamped: f64,
    pub dim: usize,
}

impl ExtremalCoefficient {
    fn from_raw(raw: f64, dim: usize) -> Self {
        Self {
            raw,
            clamped: raw.clamp(1.0, dim as f64),
            dim,
        }
    }
}

/// Estimate from `components[i][n]` = Y of component i at sample n.
pub fn extremal_coefficient(components: &[&[f64]]) -> Result<ExtremalCoefficient> {
    let dim = components.len();
    if dim == 0 {
        return Err(Error::InvalidArgument("no components".into()));
    }
    let n = components[0].len();
    if n == 0 {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    for (i, series) in components.iter().enumerate() {
        if series.len() != n {
            return Err(Error::Shape(format!(
                "component {} has {} samples, expected {}",
                i,
                series.len(),
                n
            )));
        }
        if let Some(bad) = series.iter().find(|&&y| !(y > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "component {}: unit-Frechet values must be positive, got {}",
                i, bad
            )));
        }
    }
    let mut denom = 0.0;
    for s in 0..n {
        let mut m = f64::INFINITY;
        for series in components {
            m = m.min(1.0 / series[s]);
        }
        denom += m;
    }
    Ok(ExtremalCoefficient::from_raw(n as f64 / denom, dim))
}

/// Pairwise extremal correlation from a clamped pairwise coefficient.
pub fn extremal_correlation(theta_pair: f64) -> Result<f64> {
    if !(1.0..=2.0).contains(&theta_pair) {
        return Err(Error::InvalidArgument(format!(
            "pairwise coefficient must lie in [1, 2] after clamping, got {}",
            theta_pair
        )));
    }
    Ok(2.0 - theta_pair)
}

/// Pairwise coefficients between valid pixels of one channel.
#[derive(Clone, Debug)]
pub struct ThetaMatrix {
    /// Valid pixel coordinates in row-major order; matrix indices refer
    /// to this list.
    pub pixels: Vec<(usize, usize)>,
    /// Clamped estimates; the diagonal is exactly 1.
    pub values: Array2<f64>,
    /// Range of raw estimates before clamping.
    pub raw_min: f64,
    pub raw_max: f64,
}

impl ThetaMatrix {
    /// Lower-triangle entries (i > j) in row-major pair order.
    pub fn lower_triangle(&self) -> Vec<f64> {
        let p = self.pixels.len();
        let mut out = Vec::with_capacity(p * (p - 1) / 2);
        for i in 0..p {
            for j in 0..i {
                out.push(self.values[[i, j]]);
            }
        }
        out
    }

    pub fn pair_count(&self) -> usize {
        let p = self.pixels.len();
        p * (p - 1) / 2
    }
}

/// Per-sample `1/Y = -ln U` series for every valid pixel of a channel.
fn neg_log_series(uniform: &Dataset, channel: usize) -> Result<Vec<Vec<f64>>> {
    // to_frechet validates the (0,1) range; reuse it so the map matches
    // the documented transform exactly
    let frechet = to_frechet(uniform)?;
    let pixels = uniform.valid_pixels();
    Ok(pixels
        .iter()
        .map(|&(y, x)| {
            frechet
                .pixel_series(channel, y, x)
                .iter()
                .map(|&v| 1.0 / v)
                .collect()
        })
        .collect())
}

/// Pairwise extremal coefficients (D = 2) between all valid pixels of
/// `channel`. Symmetric; a pixel paired with itself is totally
/// dependent, so the diagonal is exactly 1.
pub fn pairwise_theta_map(uniform: &Dataset, channel: usize) -> Result<ThetaMatrix> {
    if channel >= uniform.channels() {
        return Err(Error::InvalidArgument(format!(
            "channel {} out of range ({} channels)",
            channel,
            uniform.channels()
        )));
    }
    let pixels = uniform.valid_pixels();
    if pixels.is_empty() {
        return Err(Error::InvalidArgument("no valid pixels".into()));
    }
    let inv = neg_log_series(uniform, channel)?;
    let p = pixels.len();
    let n = uniform.len() as f64;

    let mut pairs = Vec::with_capacity(p * (p - 1) / 2);
    for i in 0..p {
        for j in 0..i {
            pairs.push((i, j));
        }
    }
    let raw: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (a, b) = (&inv[i], &inv[j]);
            let denom: f64 = a.iter().zip(b).map(|(&x, &y)| x.min(y)).sum();
            n / denom
        })
        .collect();

    let mut values = Array2::from_elem((p, p), 1.0);
    let mut raw_min = f64::INFINITY;
    let mut raw_max = f64::NEG_INFINITY;
    for (&(i, j), &r) in pairs.iter().zip(&raw) {
        raw_min = raw_min.min(r);
        raw_max = raw_max.max(r);
        let c = r.clamp(1.0, 2.0);
        values[[i, j]] = c;
        values[[j, i]] = c;
    }
    if p == 1 {
        raw_min = 1.0;
        raw_max = 1.0;
    }
    Ok(ThetaMatrix {
        pixels,
        values,
        raw_min,
        raw_max,
    })
}

/// Per-pixel extremal coefficient across all channels (D = channels).
/// Masked pixels are NaN.
pub fn cross_channel_theta_map(uniform: &Dataset) -> Result<Array2<f64>> {
    let (h, w) = (uniform.height(), uniform.width());
    let c = uniform.channels();
    let frechet = to_frechet(uniform)?;
    let mut out = Array2::from_elem((h, w), f64::NAN);
    let pixels = uniform.valid_pixels();
    let values: Vec<f64> = pixels
        .par_iter()
        .map(|&(y, x)| {
            let series: Vec<Vec<f64>> = (0..c).map(|ci| frechet.pixel_series(ci, y, x)).collect();
            let refs: Vec<&[f64]> = series.iter().map(|s| s.as_slice()).collect();
            extremal_coefficient(&refs).map(|e| e.clamped)
        })
        .collect::<Result<_>>()?;
    for (&(y, x), v) in pixels.iter().zip(values) {
        out[[y, x]] = v;
    }
    Ok(out)
}
