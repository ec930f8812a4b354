//! Per-pixel-per-channel marginal models.
//!
//! A [`MarginalModel`] stores, for every valid pixel-channel, the sorted
//! training sample (the empirical CDF table) and a fitted GEV. The
//! probability integral transform maps data to uniform marginals through
//! the table; the inverse transform maps uniforms back to data scale
//! through the fitted GEV quantile function.

mod fit;
mod gev;
mod io;
mod simplex;

pub use fit::{fit_gev, GevFit, MIN_SAMPLES};
pub use gev::{GevParams, GUMBEL_SHAPE_EPS};
pub use io::export_parameter_maps;
pub use simplex::{minimize, SimplexOptions, SimplexResult};

use ndarray::{Array2, Array3, Array4};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Cadence, Dataset};

/// Marginal state for one valid pixel-channel.
#[derive(Clone, Debug)]
pub struct PixelMarginal {
    /// Sorted training sample, nudged to be strictly increasing where
    /// duplicates occur (stable order, consecutive ranks).
    pub table: Vec<f64>,
    pub gev: GevParams,
    pub log_likelihood: f64,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    /// Re-aggregate each series into blocks of this many fields and fit
    /// the GEV to the block maxima; 1 fits the series as supplied. The
    /// empirical CDF table always keeps the full series.
    pub block_days: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { block_days: 1 }
    }
}

#[derive(Clone, Debug, Default)]
pub struct FitReport {
    pub fitted: usize,
    /// Pixel-channels whose likelihood search hit the iteration cap.
    pub unconverged: Vec<(usize, usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct MarginalModel {
    channels: usize,
    height: usize,
    width: usize,
    channel_names: Vec<String>,
    valid_mask: Array2<bool>,
    marginals: Vec<Option<PixelMarginal>>,
    block_days: usize,
}

impl MarginalModel {
    /// Fit one marginal per valid pixel-channel. Fits run in parallel;
    /// results do not depend on the thread count.
    pub fn fit(data: &Dataset, options: &FitOptions) -> Result<(Self, FitReport)> {
        if options.block_days == 0 {
            return Err(Error::InvalidArgument("block_days must be >= 1".into()));
        }
        let (c, h, w) = data.field_shape();
        let mask = data.valid_mask().clone();

        let mut coords = Vec::new();
        for ci in 0..c {
            for y in 0..h {
                for x in 0..w {
                    if mask[[y, x]] {
                        coords.push((ci, y, x));
                    }
                }
            }
        }
        if coords.is_empty() {
            return Err(Error::InvalidArgument("no valid pixels to fit".into()));
        }

        let fitted: Vec<PixelMarginal> = coords
            .par_iter()
            .map(|&(ci, y, x)| {
                let series = data.pixel_series(ci, y, x);
                fit_pixel(&series, options.block_days).map_err(|e| {
                    Error::InvalidArgument(format!(
                        "channel {} pixel ({}, {}): {}",
                        ci, y, x, e
                    ))
                })
            })
            .collect::<Result<_>>()?;

        let mut marginals = vec![None; c * h * w];
        let mut report = FitReport {
            fitted: fitted.len(),
            unconverged: Vec::new(),
        };
        for (&(ci, y, x), pm) in coords.iter().zip(fitted) {
            if !pm.converged {
                report.unconverged.push((ci, y, x));
            }
            marginals[index_of(ci, y, x, h, w)] = Some(pm);
        }

        Ok((
            Self {
                channels: c,
                height: h,
                width: w,
                channel_names: data.channel_names().to_vec(),
                valid_mask: mask,
                marginals,
                block_days: options.block_days,
            },
            report,
        ))
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn field_shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn valid_mask(&self) -> &Array2<bool> {
        &self.valid_mask
    }

    pub fn block_days(&self) -> usize {
        self.block_days
    }

    pub fn marginal(&self, channel: usize, y: usize, x: usize) -> Option<&PixelMarginal> {
        self.marginals[index_of(channel, y, x, self.height, self.width)].as_ref()
    }

    fn check_compatible(&self, data: &Dataset) -> Result<()> {
        if data.field_shape() != self.field_shape() {
            return Err(Error::Shape(format!(
                "dataset fields {:?} do not match model {:?}",
                data.field_shape(),
                self.field_shape()
            )));
        }
        if data.valid_mask() != &self.valid_mask {
            return Err(Error::Shape("dataset mask differs from model mask".into()));
        }
        Ok(())
    }

    /// Probability integral transform: each value is replaced by its
    /// interpolated plotting position `rank/(n+1)` against the stored
    /// table. Outputs lie strictly inside (0, 1); beyond the observed
    /// range values clamp to `1/(n+1)` and `n/(n+1)`. Masked pixels
    /// output 0.
    pub fn pit(&self, data: &Dataset) -> Result<Dataset> {
        self.check_compatible(data)?;
        let (n, c, h, w) = data.values().dim();
        let mut out = Array4::zeros((n, c, h, w));

        ndarray::Zip::indexed(out.view_mut()).par_for_each(|(i, ci, y, x), o| {
            if let Some(pm) = &self.marginals[index_of(ci, y, x, h, w)] {
                *o = table_position(&pm.table, data.values()[[i, ci, y, x]]);
            }
        });

        Dataset::from_values(
            out,
            data.channel_names().to_vec(),
            self.valid_mask.clone(),
            data.cadence(),
            data.split_tag(),
        )
    }

    /// Inverse transform through the fitted GEV quantile function.
    /// Every value on a valid pixel must lie strictly inside (0, 1).
    pub fn inverse_pit(&self, uniforms: &Dataset) -> Result<Dataset> {
        self.check_compatible(uniforms)?;
        let (n, c, h, w) = uniforms.values().dim();

        for i in 0..n {
            for ci in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        if !self.valid_mask[[y, x]] {
                            continue;
                        }
                        let u = uniforms.values()[[i, ci, y, x]];
                        if !(u > 0.0 && u < 1.0) {
                            return Err(Error::InvalidArgument(format!(
                                "field {} channel {} pixel ({}, {}): value {} outside (0, 1)",
                                i, ci, y, x, u
                            )));
                        }
                    }
                }
            }
        }

        let mut out = Array4::zeros((n, c, h, w));
        ndarray::Zip::indexed(out.view_mut()).par_for_each(|(i, ci, y, x), o| {
            if let Some(pm) = &self.marginals[index_of(ci, y, x, h, w)] {
                *o = pm.gev.quantile_unchecked(uniforms.values()[[i, ci, y, x]]);
            }
        });

        Dataset::from_values(
            out,
            uniforms.channel_names().to_vec(),
            self.valid_mask.clone(),
            Cadence::DailyMax,
            uniforms.split_tag(),
        )
    }

    /// Shape, location and scale maps as `[C, H, W]` arrays with NaN at
    /// masked pixels.
    pub fn parameter_maps(&self) -> (Array3<f64>, Array3<f64>, Array3<f64>) {
        let dims = (self.channels, self.height, self.width);
        let mut shape = Array3::from_elem(dims, f64::NAN);
        let mut location = Array3::from_elem(dims, f64::NAN);
        let mut scale = Array3::from_elem(dims, f64::NAN);
        for ci in 0..self.channels {
            for y in 0..self.height {
                for x in 0..self.width {
                    if let Some(pm) = self.marginal(ci, y, x) {
                        shape[[ci, y, x]] = pm.gev.shape();
                        location[[ci, y, x]] = pm.gev.location();
                        scale[[ci, y, x]] = pm.gev.scale();
                    }
                }
            }
        }
        (shape, location, scale)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        io::save_model(self, path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        io::load_model(path)
    }
}

/// Unit-Fréchet transform `Y = -1 / ln(U)` of a uniform-scale dataset.
/// Values on valid pixels must lie strictly inside (0, 1); masked pixels
/// output 0.
pub fn to_frechet(uniforms: &Dataset) -> Result<Dataset> {
    let (n, c, h, w) = uniforms.values().dim();
    let mask = uniforms.valid_mask();
    let mut out = Array4::zeros((n, c, h, w));
    for i in 0..n {
        for ci in 0..c {
            for y in 0..h {
                for x in 0..w {
                    if !mask[[y, x]] {
                        continue;
                    }
                    let u = uniforms.values()[[i, ci, y, x]];
                    if !(u > 0.0 && u < 1.0) {
                        return Err(Error::InvalidArgument(format!(
                            "field {} channel {} pixel ({}, {}): value {} outside (0, 1)",
                            i, ci, y, x, u
                        )));
                    }
                    out[[i, ci, y, x]] = -1.0 / u.ln();
                }
            }
        }
    }
    Dataset::from_values(
        out,
        uniforms.channel_names().to_vec(),
        mask.clone(),
        uniforms.cadence(),
        uniforms.split_tag(),
    )
}

/// True when every value on a valid pixel lies strictly inside (0, 1).
pub fn is_uniform_scale(data: &Dataset) -> bool {
    let (n, c, _, _) = data.values().dim();
    for (y, x) in data.valid_pixels() {
        for i in 0..n {
            for ci in 0..c {
                let v = data.values()[[i, ci, y, x]];
                if !(v > 0.0 && v < 1.0) {
                    return false;
                }
            }
        }
    }
    true
}

fn index_of(channel: usize, y: usize, x: usize, h: usize, w: usize) -> usize {
    (channel * h + y) * w + x
}

fn fit_pixel(series: &[f64], block_days: usize) -> Result<PixelMarginal> {
    let fit_series: Vec<f64> = if block_days > 1 {
        if series.len() % block_days != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} fields not divisible by block_days {}",
                series.len(),
                block_days
            )));
        }
        series
            .chunks(block_days)
            .map(|b| b.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    } else {
        series.to_vec()
    };
    let fit = fit_gev(&fit_series)?;

    let mut table = series.to_vec();
    table.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    // break exact ties so the table is strictly increasing
    for i in 1..table.len() {
        if table[i] <= table[i - 1] {
            table[i] = next_up(table[i - 1]);
        }
    }

    Ok(PixelMarginal {
        table,
        gev: fit.params,
        log_likelihood: fit.log_likelihood,
        converged: fit.converged,
    })
}

fn next_up(x: f64) -> f64 {
    // smallest float strictly greater than x (x finite)
    let bits = x.to_bits();
    let next = if x >= 0.0 { bits + 1 } else { bits - 1 };
    f64::from_bits(next)
}

/// Interpolated plotting position of `x` in a strictly increasing table.
fn table_position(table: &[f64], x: f64) -> f64 {
    let n = table.len();
    let denom = (n + 1) as f64;
    if x <= table[0] {
        return 1.0 / denom;
    }
    if x >= table[n - 1] {
        return n as f64 / denom;
    }
    // largest k with table[k] <= x
    let k = table.partition_point(|&t| t <= x) - 1;
    let frac = (x - table[k]) / (table[k + 1] - table[k]);
    ((k + 1) as f64 + frac) / denom
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{stratified_gev_dataset, synth_dataset, SplitTag, SynthSpec};
    use ndarray::Array4;

    fn tiny_dataset(series: &[Vec<f64>]) -> Dataset {
        // one channel, 1 x series.len() grid, series per pixel
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
    fn pit_assigns_plotting_positions() {
        // ranks over [3, 1, 2] with n = 3: rank/(n+1)
        let model = toy_model(&[3.0, 1.0, 2.0]);
        let data = tiny_dataset(&[vec![3.0, 1.0, 2.0]]);
        let u = model.pit(&data).unwrap();
        assert_eq!(u.pixel_series(0, 0, 0), vec![0.75, 0.25, 0.5]);
    }

    /// Model with a given table and an arbitrary GEV, bypassing the fit.
    fn toy_model(series: &[f64]) -> MarginalModel {
        let mut table = series.to_vec();
        table.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for i in 1..table.len() {
            if table[i] <= table[i - 1] {
                table[i] = next_up(table[i - 1]);
            }
        }
        MarginalModel {
            channels: 1,
            height: 1,
            width: 1,
            channel_names: vec!["ch0".into()],
            valid_mask: Array2::from_elem((1, 1), true),
            marginals: vec![Some(PixelMarginal {
                table,
                gev: GevParams::new(0.1, 0.0, 1.0).unwrap(),
                log_likelihood: 0.0,
                converged: true,
            })],
            block_days: 1,
        }
    }

    #[test]
    fn pit_is_shift_invariant() {
        let xs = vec![0.3, -1.2, 5.5, 2.0, 0.9];
        let shifted: Vec<f64> = xs.iter().map(|v| v + 13.7).collect();
        let a = toy_model(&xs).pit(&tiny_dataset(&[xs.clone()])).unwrap();
        let b = toy_model(&shifted).pit(&tiny_dataset(&[shifted])).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn pit_is_invariant_under_monotone_maps() {
        let xs = vec![0.3, 1.2, 5.5, 2.0, 0.9, 4.4];
        let mapped: Vec<f64> = xs.iter().map(|v| (v * 0.7f64).exp()).collect();
        let a = toy_model(&xs).pit(&tiny_dataset(&[xs.clone()])).unwrap();
        let b = toy_model(&mapped).pit(&tiny_dataset(&[mapped])).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn pit_on_training_data_is_uniform() {
        // Kolmogorov-Smirnov against the uniform CDF at the 1% level
        let margins = vec![GevParams::new(0.2, 10.0, 2.0).unwrap()];
        let data = synth_dataset(
            &SynthSpec {
                channels: 1,
                height: 2,
                width: 2,
                days: 500,
                correlation_length: 1.0,
                cross_channel_correlation: 0.0,
                margins,
                masked_border: 0,
            },
            3,
        )
        .unwrap();
        let (model, _) = MarginalModel::fit(&data, &FitOptions::default()).unwrap();
        let u = model.pit(&data).unwrap();
        let n = data.len() as f64;
        let threshold = 1.628 / n.sqrt(); // asymptotic 1% critical value
        for (y, x) in data.valid_pixels() {
            let mut us = u.pixel_series(0, y, x);
            us.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut d = 0.0f64;
            for (i, &ui) in us.iter().enumerate() {
                d = d.max(ui - i as f64 / n).max((i + 1) as f64 / n - ui);
            }
            assert!(d < threshold, "pixel ({}, {}): KS statistic {}", y, x, d);
        }
    }

    #[test]
    fn inverse_pit_at_inverse_e_returns_location() {
        let margins = vec![GevParams::new(0.2, 10.0, 2.0).unwrap()];
        let data = synth_dataset(
            &SynthSpec {
                channels: 1,
                height: 2,
                width: 3,
                days: 200,
                correlation_length: 1.0,
                cross_channel_correlation: 0.0,
                margins,
                masked_border: 0,
            },
            5,
        )
        .unwrap();
        let (model, _) = MarginalModel::fit(&data, &FitOptions::default()).unwrap();
        let mut u = Array4::zeros((1, 1, 2, 3));
        u.fill((-1.0f64).exp());
        let uniforms = Dataset::from_values(
            u,
            vec!["ch0".into()],
            data.valid_mask().clone(),
            Cadence::DailyMax,
            SplitTag::Generated,
        )
        .unwrap();
        let back = model.inverse_pit(&uniforms).unwrap();
        for (y, x) in data.valid_pixels() {
            let mu = model.marginal(0, y, x).unwrap().gev.location();
            assert!((back.values()[[0, 0, y, x]] - mu).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_pit_is_monotone() {
        let model_data = stratified_gev_dataset(
            &[GevParams::new(0.2, 10.0, 2.0).unwrap()],
            1,
            1,
            100,
            2,
        )
        .unwrap();
        let (model, _) = MarginalModel::fit(&model_data, &FitOptions::default()).unwrap();
        let gev = model.marginal(0, 0, 0).unwrap().gev;
        let mut prev = f64::NEG_INFINITY;
        for i in 1..50 {
            let v = gev.quantile(i as f64 / 50.0).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn round_trip_stays_within_two_local_spacings() {
        // stratified marginals isolate the transform machinery from
        // sampling noise; the tolerance is the table's own resolution
        let margins = vec![GevParams::new(0.2, 10.0, 2.0).unwrap()];
        let data = stratified_gev_dataset(&margins, 2, 2, 500, 7).unwrap();
        let (model, _) = MarginalModel::fit(&data, &FitOptions::default()).unwrap();
        let u = model.pit(&data).unwrap();
        let back = model.inverse_pit(&u).unwrap();
        for (y, x) in data.valid_pixels() {
            let pm = model.marginal(0, y, x).unwrap();
            let n = pm.table.len();
            for i in 0..data.len() {
                let x0 = data.values()[[i, 0, y, x]];
                let u0 = u.values()[[i, 0, y, x]];
                if !(0.1..=0.9).contains(&u0) {
                    continue;
                }
                let k = pm.table.partition_point(|&t| t <= x0).min(n - 1).max(1);
                let spacing = (pm.table[k] - pm.table[k - 1]).abs();
                let err = (back.values()[[i, 0, y, x]] - x0).abs();
                assert!(
                    err <= 2.0 * spacing.max(1e-12),
                    "pixel ({}, {}) day {}: err {} spacing {}",
                    y,
                    x,
                    i,
                    err,
                    spacing
                );
            }
        }
    }

    #[test]
    fn inverse_pit_rejects_out_of_range() {
        let model = toy_model(&[1.0, 2.0, 3.0, 4.0]);
        let data = tiny_dataset(&[vec![0.5, 1.0]]);
        assert!(model.inverse_pit(&data).is_err());
    }

    #[test]
    fn pit_rejects_shape_mismatch() {
        let model = toy_model(&[1.0, 2.0, 3.0]);
        let data = tiny_dataset(&[vec![1.0], vec![2.0]]); // 1x2 grid
        assert!(model.pit(&data).is_err());
    }

    #[test]
    fn frechet_transform_basics() {
        let e = (-1.0f64).exp();
        let data = tiny_dataset(&[vec![e, 0.5]]);
        let y = to_frechet(&data).unwrap();
        assert!((y.values()[[0, 0, 0, 0]] - 1.0).abs() < 1e-14);
        // U -> 1 gives unbounded Y
        let close = tiny_dataset(&[vec![1.0 - 1e-12, 0.5]]);
        let y = to_frechet(&close).unwrap();
        assert!(y.values()[[0, 0, 0, 0]] > 1e11);
        // out-of-range rejected
        assert!(to_frechet(&tiny_dataset(&[vec![0.0, 0.5]])).is_err());
        assert!(to_frechet(&tiny_dataset(&[vec![1.0, 0.5]])).is_err());
    }

    #[test]
    fn frechet_reciprocal_is_standard_exponential() {
        let mut s = crate::rng::RunRng::new(12).stream("frechet-mc", &[]);
        let n = 10_000;
        let us: Vec<f64> = (0..n).map(|_| s.open_uniform()).collect();
        let data = tiny_dataset(&[us]);
        let y = to_frechet(&data).unwrap();
        let mean_inv: f64 = y.pixel_series(0, 0, 0).iter().map(|v| 1.0 / v).sum::<f64>() / n as f64;
        // 1/Y is Exp(1): mean 1, sd 1/sqrt(n)
        assert!((mean_inv - 1.0).abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn frechet_is_strictly_increasing() {
        let data = tiny_dataset(&[vec![0.1, 0.2, 0.5, 0.9, 0.99]]);
        let y = to_frechet(&data).unwrap().pixel_series(0, 0, 0);
        for i in 1..y.len() {
            assert!(y[i] > y[i - 1]);
        }
    }

    #[test]
    fn block_refit_changes_gev_not_table() {
        let margins = vec![GevParams::new(0.1, 5.0, 1.0).unwrap()];
        let data = stratified_gev_dataset(&margins, 1, 1, 120, 9).unwrap();
        let (daily, _) = MarginalModel::fit(&data, &FitOptions { block_days: 1 }).unwrap();
        let (blocked, _) = MarginalModel::fit(&data, &FitOptions { block_days: 4 }).unwrap();
        assert_eq!(
            daily.marginal(0, 0, 0).unwrap().table,
            blocked.marginal(0, 0, 0).unwrap().table
        );
        assert!(
            (daily.marginal(0, 0, 0).unwrap().gev.location()
                - blocked.marginal(0, 0, 0).unwrap().gev.location())
            .abs()
                > 1e-6
        );
    }
}
