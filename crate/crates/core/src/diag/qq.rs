//! Q-Q comparison vectors.

use crate::error::{Error, Result};

/// Paired sorted quantile vectors for a Q-Q plot. Both collections are
/// sorted ascending; if the lengths differ the longer one is
/// quantile-interpolated at the shorter one's plotting positions
/// `(k+1)/(m+1)`.
pub fn qq_vectors(a: &[f64], b: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("empty collection".into()));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).expect("finite values"));
    sb.sort_by(|x, y| x.partial_cmp(y).expect("finite values"));

    if sa.len() == sb.len() {
        return Ok((sa, sb));
    }
    let (short, long, a_is_short) = if sa.len() < sb.len() {
        (&sa, &sb, true)
    } else {
        (&sb, &sa, false)
    };
    let m = short.len();
    let interpolated: Vec<f64> = (0..m)
        .map(|k| {
            let p = (k + 1) as f64 / (m + 1) as f64;
            empirical_quantile(long, p)
        })
        .collect();
    if a_is_short {
        Ok((sa, interpolated))
    } else {
        Ok((interpolated, sb))
    }
}

/// Linear interpolation of the empirical quantile function of a sorted
/// sample at probability `p`, with plotting positions `(k+1)/(n+1)`.
fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let pos = p * (n + 1) as f64 - 1.0; // index in plotting-position space
    if pos <= 0.0 {
        return sorted[0];
    }
    if pos >= (n - 1) as f64 {
        return sorted[n - 1];
    }
    let k = pos.floor() as usize;
    let frac = pos - k as f64;
    sorted[k] * (1.0 - frac) + sorted[k + 1] * frac
}
