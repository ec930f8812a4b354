//! Pairwise Pearson correlation matrices.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Dataset;

#[derive(Clone, Debug)]
pub struct PearsonMatrix {
    pub pixels: Vec<(usize, usize)>,
    /// Correlations; the diagonal is 1. Entries touching a
    /// zero-variance pixel are NaN, never silently 0.
    pub values: Array2<f64>,
    /// Indices (into `pixels`) of zero-variance pixels.
    pub undefined: Vec<usize>,
}

impl PearsonMatrix {
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
}

/// Pearson correlations between all valid pixels of `channel`,
/// estimated over the sample axis.
pub fn pearson_matrix(data: &Dataset, channel: usize) -> Result<PearsonMatrix> {
    if channel >= data.channels() {
        return Err(Error::InvalidArgument(format!(
            "channel {} out of range ({} channels)",
            channel,
            data.channels()
        )));
    }
    let n = data.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 samples for a correlation".into(),
        ));
    }
    let pixels = data.valid_pixels();
    if pixels.is_empty() {
        return Err(Error::InvalidArgument("no valid pixels".into()));
    }
    let p = pixels.len();

    // centre each series once
    let centred: Vec<Vec<f64>> = pixels
        .iter()
        .map(|&(y, x)| {
            let series = data.pixel_series(channel, y, x);
            let mean = series.iter().sum::<f64>() / n as f64;
            series.iter().map(|v| v - mean).collect()
        })
        .collect();
    let sum_sq: Vec<f64> = centred
        .iter()
        .map(|s| s.iter().map(|v| v * v).sum())
        .collect();
    let undefined: Vec<usize> = (0..p).filter(|&i| sum_sq[i] == 0.0).collect();

    let mut pairs = Vec::with_capacity(p * (p - 1) / 2);
    for i in 0..p {
        for j in 0..i {
            pairs.push((i, j));
        }
    }
    let corr: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            if sum_sq[i] == 0.0 || sum_sq[j] == 0.0 {
                return f64::NAN;
            }
            let cov: f64 = centred[i].iter().zip(&centred[j]).map(|(a, b)| a * b).sum();
            cov / (sum_sq[i] * sum_sq[j]).sqrt()
        })
        .collect();

    let mut values = Array2::from_elem((p, p), 1.0);
    for &i in &undefined {
        values[[i, i]] = f64::NAN;
    }
    for (&(i, j), &r) in pairs.iter().zip(&corr) {
        values[[i, j]] = r;
        values[[j, i]] = r;
    }
    Ok(PearsonMatrix {
        pixels,
        values,
        undefined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Cadence, SplitTag};
    use crate::rng::RunRng;
    use ndarray::Array4;

    fn dataset_from_series(series: &[Vec<f64>]) -> Dataset {
        let n = series[0].len();
        let w = series.len();
        let mut values = Array4::zeros((n, 1, 1, w));
        for (x, s) in series.iter().enumerate() {
            for (i, &v) in s.iter().enumerate() {
                values[[i, 0, 0, x]] = v;
            }
        }
        Dataset::from_values(
            values,
            vec!["ch0".into()],
            Array2::from_elem((1, w), true),
            Cadence::DailyMax,
            SplitTag::Train,
        )
        .unwrap()
    }

    #[test]
    fn self_correlation_is_one_and_negation_is_minus_one() {
        let xs = vec![1.0, 3.0, 2.0, 5.0, 4.0];
        let neg: Vec<f64> = xs.iter().map(|v| -v).collect();
        let ds = dataset_from_series(&[xs.clone(), xs.clone(), neg]);
        let m = pearson_matrix(&ds, 0).unwrap();
        assert!((m.values[[1, 0]] - 1.0).abs() < 1e-12);
        assert!((m.values[[2, 0]] + 1.0).abs() < 1e-12);
        assert_eq!(m.values[[0, 0]], 1.0);
    }

    #[test]
    fn matches_brute_force_two_pass_formula() {
        let mut s = RunRng::new(31).stream("pearson", &[]);
        let series: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..50).map(|_| s.standard_normal()).collect())
            .collect();
        let ds = dataset_from_series(&series);
        let m = pearson_matrix(&ds, 0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                // independent oracle: means first, then explicit sums
                let (a, b) = (&series[i], &series[j]);
                let n = a.len() as f64;
                let ma = a.iter().sum::<f64>() / n;
                let mb = b.iter().sum::<f64>() / n;
                let mut cov = 0.0;
                let mut va = 0.0;
                let mut vb = 0.0;
                for k in 0..a.len() {
                    cov += (a[k] - ma) * (b[k] - mb);
                    va += (a[k] - ma) * (a[k] - ma);
                    vb += (b[k] - mb) * (b[k] - mb);
                }
                let expect = cov / (va * vb).sqrt();
                assert!(
                    (m.values[[i, j]] - expect).abs() < 1e-12,
                    "({}, {}): {} vs {}",
                    i,
                    j,
                    m.values[[i, j]],
                    expect
                );
            }
        }
    }

    #[test]
    fn invariant_under_positive_affine_rescaling() {
        let mut s = RunRng::new(32).stream("affine", &[]);
        let a: Vec<f64> = (0..40).map(|_| s.standard_normal()).collect();
        let b: Vec<f64> = (0..40).map(|_| s.standard_normal()).collect();
        let scaled: Vec<f64> = a.iter().map(|v| 3.5 * v + 11.0).collect();
        let m1 = pearson_matrix(&dataset_from_series(&[a, b.clone()]), 0).unwrap();
        let m2 = pearson_matrix(&dataset_from_series(&[scaled, b]), 0).unwrap();
        assert!((m1.values[[1, 0]] - m2.values[[1, 0]]).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_pixels_are_flagged_not_zeroed() {
        let xs = vec![1.0, 2.0, 3.0];
        let flat = vec![4.0, 4.0, 4.0];
        let m = pearson_matrix(&dataset_from_series(&[xs, flat]), 0).unwrap();
        assert_eq!(m.undefined, vec![1]);
        assert!(m.values[[1, 0]].is_nan());
        assert!(m.values[[1, 1]].is_nan());
        assert_eq!(m.values[[0, 0]], 1.0);
    }

    #[test]
    fn single_sample_rejected() {
        let ds = dataset_from_series(&[vec![1.0], vec![2.0]]);
        assert!(pearson_matrix(&ds, 0).is_err());
    }
}
