//! Temporal aggregation and spatial resampling.

use ndarray::{Array2, Array3, Array4};

use crate::error::{Error, Result};

use super::{Cadence, Dataset, GridField};

/// Collapse consecutive blocks of `hours_per_block` fields to their
/// per-pixel maxima. No-data pixels stay no-data (value 0).
pub fn daily_maxima(hourly: &Dataset, hours_per_block: usize) -> Result<Dataset> {
    if hourly.cadence() != Cadence::Hourly {
        return Err(Error::InvalidArgument(
            "daily_maxima expects an hourly dataset".into(),
        ));
    }
    if hours_per_block == 0 {
        return Err(Error::InvalidArgument("hours_per_block must be >= 1".into()));
    }
    let n = hourly.len();
    if n % hours_per_block != 0 {
        return Err(Error::InvalidArgument(format!(
            "{} fields not divisible by block size {}",
            n, hours_per_block
        )));
    }
    let (c, h, w) = hourly.field_shape();
    let blocks = n / hours_per_block;
    let mask = hourly.valid_mask();
    let values = hourly.values();

    let mut out = Array4::zeros((blocks, c, h, w));
    for b in 0..blocks {
        for ci in 0..c {
            for y in 0..h {
                for x in 0..w {
                    if !mask[[y, x]] {
                        continue;
                    }
                    let mut m = f64::NEG_INFINITY;
                    for k in 0..hours_per_block {
                        let v = values[[b * hours_per_block + k, ci, y, x]];
                        if v.is_nan() {
                            return Err(Error::NonFinite(format!(
                                "NaN in block {} at channel {} pixel ({}, {})",
                                b, ci, y, x
                            )));
                        }
                        m = m.max(v);
                    }
                    out[[b, ci, y, x]] = m;
                }
            }
        }
    }
    Dataset::from_values(
        out,
        hourly.channel_names().to_vec(),
        mask.clone(),
        Cadence::DailyMax,
        hourly.split_tag(),
    )
}

/// Bilinear resample under the half-pixel-centres convention
/// (align-corners false); the mask is resampled by nearest neighbour.
pub fn resize_bilinear(field: &GridField, out_h: usize, out_w: usize) -> Result<GridField> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidArgument("output dimensions must be >= 1".into()));
    }
    let (c, in_h, in_w) = field.values().dim();
    let sy = in_h as f64 / out_h as f64;
    let sx = in_w as f64 / out_w as f64;

    let coord = |o: usize, scale: f64| -> f64 { (o as f64 + 0.5) * scale - 0.5 };
    let clamp = |i: i64, n: usize| -> usize { i.clamp(0, n as i64 - 1) as usize };

    let mut out = Array3::zeros((c, out_h, out_w));
    for y in 0..out_h {
        let fy = coord(y, sy);
        let y0 = fy.floor();
        let dy = fy - y0;
        let (ya, yb) = (clamp(y0 as i64, in_h), clamp(y0 as i64 + 1, in_h));
        for x in 0..out_w {
            let fx = coord(x, sx);
            let x0 = fx.floor();
            let dx = fx - x0;
            let (xa, xb) = (clamp(x0 as i64, in_w), clamp(x0 as i64 + 1, in_w));
            for ci in 0..c {
                let v = field.values();
                let top = v[[ci, ya, xa]] * (1.0 - dx) + v[[ci, ya, xb]] * dx;
                let bot = v[[ci, yb, xa]] * (1.0 - dx) + v[[ci, yb, xb]] * dx;
                out[[ci, y, x]] = top * (1.0 - dy) + bot * dy;
            }
        }
    }

    let mut mask = Array2::from_elem((out_h, out_w), false);
    for y in 0..out_h {
        let ny = clamp(((y as f64 + 0.5) * sy).floor() as i64, in_h);
        for x in 0..out_w {
            let nx = clamp(((x as f64 + 0.5) * sx).floor() as i64, in_w);
            mask[[y, x]] = field.valid_mask()[[ny, nx]];
        }
    }

    GridField::new(out, field.channel_names().to_vec(), mask)
}

/// Centre the field in a larger grid; padded cells carry value 0 and are
/// masked invalid. Excess space splits floor-left / ceil-right.
pub fn zero_pad(field: &GridField, out_h: usize, out_w: usize) -> Result<GridField> {
    let (c, in_h, in_w) = field.values().dim();
    if out_h < in_h || out_w < in_w {
        return Err(Error::InvalidArgument(format!(
            "pad target {}x{} smaller than field {}x{}",
            out_h, out_w, in_h, in_w
        )));
    }
    let top = (out_h - in_h) / 2;
    let left = (out_w - in_w) / 2;

    let mut out = Array3::zeros((c, out_h, out_w));
    let mut mask = Array2::from_elem((out_h, out_w), false);
    for y in 0..in_h {
        for x in 0..in_w {
            mask[[y + top, x + left]] = field.valid_mask()[[y, x]];
            for ci in 0..c {
                out[[ci, y + top, x + left]] = field.values()[[ci, y, x]];
            }
        }
    }
    GridField::new(out, field.channel_names().to_vec(), mask)
}

/// Cut the `h x w` window whose top-left corner is `(top, left)`.
pub fn crop(field: &GridField, top: usize, left: usize, h: usize, w: usize) -> Result<GridField> {
    let (_, in_h, in_w) = field.values().dim();
    if h == 0 || w == 0 || top + h > in_h || left + w > in_w {
        return Err(Error::InvalidArgument(format!(
            "crop window ({},{})+{}x{} outside field {}x{}",
            top, left, h, w, in_h, in_w
        )));
    }
    let values = field
        .values()
        .slice(ndarray::s![.., top..top + h, left..left + w])
        .to_owned();
    let mask = field
        .valid_mask()
        .slice(ndarray::s![top..top + h, left..left + w])
        .to_owned();
    GridField::new(values, field.channel_names().to_vec(), mask)
}

fn map_fields(
    ds: &Dataset,
    f: impl Fn(&GridField) -> Result<GridField> + Sync,
) -> Result<Dataset> {
    use rayon::prelude::*;
    let fields: Vec<GridField> = (0..ds.len())
        .into_par_iter()
        .map(|i| f(&ds.field(i)))
        .collect::<Result<_>>()?;
    Dataset::from_fields(fields, ds.cadence(), ds.split_tag())
}

pub fn resize_dataset(ds: &Dataset, out_h: usize, out_w: usize) -> Result<Dataset> {
    map_fields(ds, |f| resize_bilinear(f, out_h, out_w))
}

pub fn zero_pad_dataset(ds: &Dataset, out_h: usize, out_w: usize) -> Result<Dataset> {
    map_fields(ds, |f| zero_pad(f, out_h, out_w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{default_channel_names, SplitTag};
    use crate::rng::RunRng;
    use approx::assert_abs_diff_eq;
    use ndarray::arr2;

    fn dataset(values: Array4<f64>, mask: Option<Array2<bool>>, cadence: Cadence) -> Dataset {
        let (_, c, h, w) = values.dim();
        let mask = mask.unwrap_or_else(|| Array2::from_elem((h, w), true));
        Dataset::from_values(values, default_channel_names(c), mask, cadence, SplitTag::Train)
            .unwrap()
    }

    fn field(values: Array3<f64>) -> GridField {
        let (c, h, w) = values.dim();
        GridField::new(values, default_channel_names(c), Array2::from_elem((h, w), true)).unwrap()
    }

    #[test]
    fn daily_maxima_constant_input() {
        let values = Array4::from_elem((24, 1, 2, 2), 5.0);
        let out = daily_maxima(&dataset(values, None, Cadence::Hourly), 24).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out.values().iter().all(|&v| v == 5.0));
        assert_eq!(out.cadence(), Cadence::DailyMax);
    }

    #[test]
    fn daily_maxima_takes_block_max() {
        let mut values = Array4::zeros((3, 1, 1, 1));
        values[[0, 0, 0, 0]] = 1.0;
        values[[1, 0, 0, 0]] = 3.0;
        values[[2, 0, 0, 0]] = 2.0;
        let out = daily_maxima(&dataset(values, None, Cadence::Hourly), 3).unwrap();
        assert_eq!(out.values()[[0, 0, 0, 0]], 3.0);
    }

    #[test]
    fn daily_maxima_matches_brute_force() {
        let mut s = RunRng::new(11).stream("agg", &[]);
        let values = Array4::from_shape_fn((48, 2, 3, 4), |_| s.standard_normal());
        let ds = dataset(values.clone(), None, Cadence::Hourly);
        let out = daily_maxima(&ds, 24).unwrap();
        for b in 0..2 {
            for c in 0..2 {
                for y in 0..3 {
                    for x in 0..4 {
                        let mut expect = f64::NEG_INFINITY;
                        for k in 0..24 {
                            expect = expect.max(values[[b * 24 + k, c, y, x]]);
                        }
                        assert_eq!(out.values()[[b, c, y, x]], expect);
                    }
                }
            }
        }
    }

    #[test]
    fn daily_maxima_rejects_ragged_blocks() {
        let values = Array4::zeros((25, 1, 1, 1));
        assert!(daily_maxima(&dataset(values, None, Cadence::Hourly), 24).is_err());
    }

    #[test]
    fn daily_maxima_is_identity_at_block_one() {
        let mut s = RunRng::new(4).stream("agg1", &[]);
        let values = Array4::from_shape_fn((6, 1, 2, 2), |_| s.standard_normal());
        let ds = dataset(values, None, Cadence::Hourly);
        let out = daily_maxima(&ds, 1).unwrap();
        assert_eq!(out.values(), ds.values());
    }

    #[test]
    fn resize_constant_stays_constant() {
        let f = field(Array3::from_elem((2, 3, 4), 7.5));
        let out = resize_bilinear(&f, 7, 9).unwrap();
        for &v in out.values().iter() {
            assert_abs_diff_eq!(v, 7.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn resize_2x2_to_3x3_hand_values() {
        let f = field(
            Array3::from_shape_vec((1, 2, 2), vec![0.0, 1.0, 2.0, 3.0]).unwrap(),
        );
        let out = resize_bilinear(&f, 3, 3).unwrap();
        // half-pixel-centre bilinear oracle computed by hand
        let expect = arr2(&[[0.0, 0.5, 1.0], [1.0, 1.5, 2.0], [2.0, 2.5, 3.0]]);
        for y in 0..3 {
            for x in 0..3 {
                assert_abs_diff_eq!(out.values()[[0, y, x]], expect[[y, x]], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn resize_identity_when_same_dims() {
        let mut s = RunRng::new(2).stream("resize", &[]);
        let f = field(Array3::from_shape_fn((2, 4, 5), |_| s.standard_normal()));
        let out = resize_bilinear(&f, 4, 5).unwrap();
        for (a, b) in f.values().iter().zip(out.values().iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn resize_preserves_bounds() {
        let mut s = RunRng::new(8).stream("bounds", &[]);
        let f = field(Array3::from_shape_fn((1, 5, 7), |_| s.standard_normal()));
        let lo = f.values().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = f.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let out = resize_bilinear(&f, 13, 3).unwrap();
        for &v in out.values().iter() {
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    #[test]
    fn zero_pad_18x22_to_20x24_adds_one_cell_border() {
        let f = field(Array3::from_elem((1, 18, 22), 1.0));
        let out = zero_pad(&f, 20, 24).unwrap();
        assert_eq!(out.values().dim(), (1, 20, 24));
        for y in 0..20 {
            for x in 0..24 {
                let inside = (1..19).contains(&y) && (1..23).contains(&x);
                assert_eq!(out.values()[[0, y, x]], if inside { 1.0 } else { 0.0 });
                assert_eq!(out.valid_mask()[[y, x]], inside);
            }
        }
    }

    #[test]
    fn zero_pad_equal_dims_unchanged() {
        let f = field(Array3::from_elem((1, 3, 3), 2.0));
        let out = zero_pad(&f, 3, 3).unwrap();
        assert_eq!(out.values(), f.values());
        assert_eq!(out.valid_mask(), f.valid_mask());
    }

    #[test]
    fn zero_pad_1x1_centres_value() {
        let f = field(Array3::from_elem((1, 1, 1), 7.0));
        let out = zero_pad(&f, 3, 3).unwrap();
        for y in 0..3 {
            for x in 0..3 {
                let expect = if (y, x) == (1, 1) { 7.0 } else { 0.0 };
                assert_eq!(out.values()[[0, y, x]], expect);
            }
        }
    }

    #[test]
    fn zero_pad_rejects_shrinking() {
        let f = field(Array3::zeros((1, 4, 4)));
        assert!(zero_pad(&f, 3, 5).is_err());
    }

    #[test]
    fn pad_then_crop_recovers_original() {
        let mut s = RunRng::new(5).stream("padcrop", &[]);
        let f = field(Array3::from_shape_fn((3, 18, 22), |_| s.standard_normal()));
        let padded = zero_pad(&f, 20, 24).unwrap();
        let back = crop(&padded, 1, 1, 18, 22).unwrap();
        assert_eq!(back.values(), f.values());
        assert_eq!(back.valid_mask(), f.valid_mask());
    }
}
