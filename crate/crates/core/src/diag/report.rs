//! Dependence comparison across train / test / generated sets.
//!
//! All diagnostics run on the uniform (rank) scale: train and test data
//! are passed through the marginal model's probability integral
//! transform when they arrive on the original scale, so correlations
//! measure dependence structure rather than marginal shape.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::Dataset;
use crate::margins::{is_uniform_scale, MarginalModel};

use super::extremal::{cross_channel_theta_map, pairwise_theta_map, ThetaMatrix};
use super::pearson::{pearson_matrix, PearsonMatrix};
use super::qq::qq_vectors;

/// One value per dataset role.
#[derive(Clone, Debug)]
pub struct SetTriple<T> {
    pub train: T,
    pub test: T,
    pub generated: T,
}

#[derive(Clone, Debug)]
pub struct ChannelReport {
    pub name: String,
    pub theta: SetTriple<ThetaMatrix>,
    pub pearson: SetTriple<PearsonMatrix>,
}

#[derive(Clone, Debug)]
pub struct ChannelSummary {
    pub name: String,
    pub theta_rmse_generated_vs_test: f64,
    pub theta_rmse_train_vs_test: f64,
    pub chi_rmse_generated_vs_test: f64,
    pub chi_rmse_train_vs_test: f64,
    pub pearson_rmse_generated_vs_test: f64,
    pub pearson_rmse_train_vs_test: f64,
}

#[derive(Clone, Debug)]
pub struct ReportSummary {
    pub pixels: usize,
    pub pairs: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub n_generated: usize,
    pub channels: Vec<ChannelSummary>,
    pub pooled_theta_rmse_generated_vs_test: f64,
    pub pooled_theta_rmse_train_vs_test: f64,
    pub theta3_rmse_generated_vs_test: f64,
    pub theta3_rmse_train_vs_test: f64,
    /// Mean pairwise coefficient of the generated set minus the test
    /// set; positive values mean dependence is underestimated.
    pub mean_theta_generated_minus_test: f64,
    pub raw_theta_range_train: (f64, f64),
    pub raw_theta_range_test: (f64, f64),
    pub raw_theta_range_generated: (f64, f64),
}

#[derive(Clone, Debug)]
pub struct DependenceReport {
    pub channels: Vec<ChannelReport>,
    pub theta3: SetTriple<Array2<f64>>,
    pub summary: ReportSummary,
}

/// Root-mean-square difference, skipping pairs where either side is
/// NaN (flagged-undefined correlations).
pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    let mut n = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        if x.is_nan() || y.is_nan() {
            continue;
        }
        acc += (x - y) * (x - y);
        n += 1;
    }
    if n == 0 {
        f64::NAN
    } else {
        (acc / n as f64).sqrt()
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// PIT `data` through `model` unless it is already on the uniform
/// scale.
fn ensure_uniform(data: &Dataset, model: &MarginalModel) -> Result<Dataset> {
    if is_uniform_scale(data) {
        if data.valid_mask() != model.valid_mask() {
            return Err(Error::Shape(
                "uniform-scale dataset mask differs from model mask".into(),
            ));
        }
        Ok(data.clone())
    } else {
        model.pit(data)
    }
}

/// Compare dependence in train, test and generated sets.
///
/// Train and test may arrive on the original or uniform scale (the
/// transform is applied as needed); the generated set must already be
/// uniform, as produced by the generator. Its mask is replaced by the
/// model's so diagnostics skip the same no-data pixels everywhere.
pub fn compare_sets(
    train: &Dataset,
    test: &Dataset,
    generated: &Dataset,
    model: &MarginalModel,
) -> Result<DependenceReport> {
    for (role, ds) in [("train", train), ("test", test), ("generated", generated)] {
        if ds.field_shape() != model.field_shape() {
            return Err(Error::Shape(format!(
                "{} dataset fields {:?} do not match model {:?}",
                role,
                ds.field_shape(),
                model.field_shape()
            )));
        }
    }
    let train_u = ensure_uniform(train, model)?;
    let test_u = ensure_uniform(test, model)?;
    if !is_uniform_scale(generated) {
        return Err(Error::InvalidArgument(
            "generated dataset must be on the uniform scale; transform it first".into(),
        ));
    }
    let generated_u = Dataset::from_values(
        generated.values().clone(),
        train_u.channel_names().to_vec(),
        model.valid_mask().clone(),
        generated.cadence(),
        generated.split_tag(),
    )?;

    let c = model.channels();
    let mut channels = Vec::with_capacity(c);
    let mut channel_summaries = Vec::with_capacity(c);
    let mut pooled: SetTriple<Vec<f64>> = SetTriple {
        train: Vec::new(),
        test: Vec::new(),
        generated: Vec::new(),
    };
    let mut raw_ranges = SetTriple {
        train: (f64::INFINITY, f64::NEG_INFINITY),
        test: (f64::INFINITY, f64::NEG_INFINITY),
        generated: (f64::INFINITY, f64::NEG_INFINITY),
    };

    for ci in 0..c {
        let name = model.channel_names()[ci].clone();
        let theta = SetTriple {
            train: pairwise_theta_map(&train_u, ci)?,
            test: pairwise_theta_map(&test_u, ci)?,
            generated: pairwise_theta_map(&generated_u, ci)?,
        };
        let pearson = SetTriple {
            train: pearson_matrix(&train_u, ci)?,
            test: pearson_matrix(&test_u, ci)?,
            generated: pearson_matrix(&generated_u, ci)?,
        };

        let (tt, te, tg) = (
            theta.train.lower_triangle(),
            theta.test.lower_triangle(),
            theta.generated.lower_triangle(),
        );
        let (pt, pe, pg) = (
            pearson.train.lower_triangle(),
            pearson.test.lower_triangle(),
            pearson.generated.lower_triangle(),
        );
        let theta_rmse_gt = rmse(&tg, &te);
        let theta_rmse_tt = rmse(&tt, &te);
        channel_summaries.push(ChannelSummary {
            name: name.clone(),
            theta_rmse_generated_vs_test: theta_rmse_gt,
            theta_rmse_train_vs_test: theta_rmse_tt,
            // chi = 2 - theta is a reflection, so the distances match
            chi_rmse_generated_vs_test: theta_rmse_gt,
            chi_rmse_train_vs_test: theta_rmse_tt,
            pearson_rmse_generated_vs_test: rmse(&pg, &pe),
            pearson_rmse_train_vs_test: rmse(&pt, &pe),
        });

        let fold = |r: (f64, f64), m: &ThetaMatrix| (r.0.min(m.raw_min), r.1.max(m.raw_max));
        raw_ranges.train = fold(raw_ranges.train, &theta.train);
        raw_ranges.test = fold(raw_ranges.test, &theta.test);
        raw_ranges.generated = fold(raw_ranges.generated, &theta.generated);

        pooled.train.extend(tt);
        pooled.test.extend(te);
        pooled.generated.extend(tg);
        channels.push(ChannelReport {
            name,
            theta,
            pearson,
        });
    }

    let theta3 = SetTriple {
        train: cross_channel_theta_map(&train_u)?,
        test: cross_channel_theta_map(&test_u)?,
        generated: cross_channel_theta_map(&generated_u)?,
    };
    let flat3 = |m: &Array2<f64>| -> Vec<f64> { m.iter().cloned().collect() };

    let summary = ReportSummary {
        pixels: channels[0].theta.train.pixels.len(),
        pairs: channels[0].theta.train.pair_count(),
        n_train: train_u.len(),
        n_test: test_u.len(),
        n_generated: generated_u.len(),
        channels: channel_summaries,
        pooled_theta_rmse_generated_vs_test: rmse(&pooled.generated, &pooled.test),
        pooled_theta_rmse_train_vs_test: rmse(&pooled.train, &pooled.test),
        theta3_rmse_generated_vs_test: rmse(&flat3(&theta3.generated), &flat3(&theta3.test)),
        theta3_rmse_train_vs_test: rmse(&flat3(&theta3.train), &flat3(&theta3.test)),
        mean_theta_generated_minus_test: mean(&pooled.generated) - mean(&pooled.test),
        raw_theta_range_train: raw_ranges.train,
        raw_theta_range_test: raw_ranges.test,
        raw_theta_range_generated: raw_ranges.generated,
    };

    Ok(DependenceReport {
        channels,
        theta3,
        summary,
    })
}

/// Pooled pairwise-coefficient RMSE between two uniform-scale datasets
/// (the hyperparameter-sweep objective).
pub fn pairwise_theta_rmse(a: &Dataset, b: &Dataset) -> Result<f64> {
    if a.field_shape() != b.field_shape() {
        return Err(Error::Shape(format!(
            "datasets {:?} vs {:?}",
            a.field_shape(),
            b.field_shape()
        )));
    }
    let mut pa = Vec::new();
    let mut pb = Vec::new();
    for ci in 0..a.channels() {
        pa.extend(pairwise_theta_map(a, ci)?.lower_triangle());
        pb.extend(pairwise_theta_map(b, ci)?.lower_triangle());
    }
    Ok(rmse(&pa, &pb))
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|ch| if ch.is_ascii_alphanumeric() { ch.to_ascii_lowercase() } else { '_' })
        .collect()
}

impl DependenceReport {
    /// Fixed file set: `theta_pairs_<channel>.csv`,
    /// `chi_pairs_<channel>.csv`, `pearson_<channel>.csv`,
    /// `theta_3d_map.csv`, `qq_train_vs_test.csv`,
    /// `qq_generated_vs_test.csv`, `summary.txt`.
    pub fn save(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();

        for ch in &self.channels {
            let pixels = &ch.theta.train.pixels;
            let p = pixels.len();

            let write_pairs = |path: PathBuf,
                               header: &str,
                               train: &Array2<f64>,
                               test: &Array2<f64>,
                               generated: &Array2<f64>,
                               map: &dyn Fn(f64) -> f64|
             -> Result<PathBuf> {
                let mut out = BufWriter::new(File::create(&path)?);
                writeln!(out, "{}", header)?;
                for i in 0..p {
                    for j in 0..i {
                        writeln!(
                            out,
                            "{},{},{},{},{}",
                            i,
                            j,
                            map(train[[i, j]]),
                            map(test[[i, j]]),
                            map(generated[[i, j]])
                        )?;
                    }
                }
                out.flush()?;
                Ok(path)
            };

            let slug = sanitize(&ch.name);
            written.push(write_pairs(
                dir.join(format!("theta_pairs_{}.csv", slug)),
                "i,j,train,test,generated",
                &ch.theta.train.values,
                &ch.theta.test.values,
                &ch.theta.generated.values,
                &|v| v,
            )?);
            written.push(write_pairs(
                dir.join(format!("chi_pairs_{}.csv", slug)),
                "i,j,train,test,generated",
                &ch.theta.train.values,
                &ch.theta.test.values,
                &ch.theta.generated.values,
                &|v| 2.0 - v,
            )?);
            written.push(write_pairs(
                dir.join(format!("pearson_{}.csv", slug)),
                "i,j,train,test,generated",
                &ch.pearson.train.values,
                &ch.pearson.test.values,
                &ch.pearson.generated.values,
                &|v| v,
            )?);
        }

        // three-channel coefficient per pixel
        {
            let path = dir.join("theta_3d_map.csv");
            let mut out = BufWriter::new(File::create(&path)?);
            writeln!(out, "y,x,train,test,generated")?;
            let (h, w) = self.theta3.train.dim();
            for y in 0..h {
                for x in 0..w {
                    let t = self.theta3.train[[y, x]];
                    if t.is_nan() {
                        continue;
                    }
                    writeln!(
                        out,
                        "{},{},{},{},{}",
                        y,
                        x,
                        t,
                        self.theta3.test[[y, x]],
                        self.theta3.generated[[y, x]]
                    )?;
                }
            }
            out.flush()?;
            written.push(path);
        }

        // Q-Q vectors of the pairwise coefficients, one collection per
        // channel plus the cross-channel map
        for (fname, left_of) in [
            ("qq_train_vs_test.csv", 0usize),
            ("qq_generated_vs_test.csv", 1usize),
        ] {
            let path = dir.join(fname);
            let mut out = BufWriter::new(File::create(&path)?);
            writeln!(out, "collection,index,left,right")?;
            for ch in &self.channels {
                let left = if left_of == 0 {
                    ch.theta.train.lower_triangle()
                } else {
                    ch.theta.generated.lower_triangle()
                };
                let right = ch.theta.test.lower_triangle();
                let (ql, qr) = qq_vectors(&left, &right)?;
                for (k, (l, r)) in ql.iter().zip(&qr).enumerate() {
                    writeln!(out, "theta_pairs_{},{},{},{}", sanitize(&ch.name), k, l, r)?;
                }
            }
            let collect3 = |m: &Array2<f64>| -> Vec<f64> {
                m.iter().cloned().filter(|v| !v.is_nan()).collect()
            };
            let left = if left_of == 0 {
                collect3(&self.theta3.train)
            } else {
                collect3(&self.theta3.generated)
            };
            let right = collect3(&self.theta3.test);
            let (ql, qr) = qq_vectors(&left, &right)?;
            for (k, (l, r)) in ql.iter().zip(&qr).enumerate() {
                writeln!(out, "theta_3d,{},{},{}", k, l, r)?;
            }
            out.flush()?;
            written.push(path);
        }

        // scalar summaries
        {
            let path = dir.join("summary.txt");
            let mut out = BufWriter::new(File::create(&path)?);
            let s = &self.summary;
            writeln!(out, "pixels={}", s.pixels)?;
            writeln!(out, "pairs={}", s.pairs)?;
            writeln!(out, "n_train={}", s.n_train)?;
            writeln!(out, "n_test={}", s.n_test)?;
            writeln!(out, "n_generated={}", s.n_generated)?;
            writeln!(
                out,
                "chi_definition=2-theta (keeps chi in [0,1]; the 1-theta variant would map the pairwise range [1,2] to [-1,0])"
            )?;
            for ch in &s.channels {
                writeln!(
                    out,
                    "channel {}: theta_rmse_generated_vs_test={}",
                    ch.name, ch.theta_rmse_generated_vs_test
                )?;
                writeln!(
                    out,
                    "channel {}: theta_rmse_train_vs_test={}",
                    ch.name, ch.theta_rmse_train_vs_test
                )?;
                writeln!(
                    out,
                    "channel {}: chi_rmse_generated_vs_test={}",
                    ch.name, ch.chi_rmse_generated_vs_test
                )?;
                writeln!(
                    out,
                    "channel {}: chi_rmse_train_vs_test={}",
                    ch.name, ch.chi_rmse_train_vs_test
                )?;
                writeln!(
                    out,
                    "channel {}: pearson_rmse_generated_vs_test={}",
                    ch.name, ch.pearson_rmse_generated_vs_test
                )?;
                writeln!(
                    out,
                    "channel {}: pearson_rmse_train_vs_test={}",
                    ch.name, ch.pearson_rmse_train_vs_test
                )?;
            }
            writeln!(
                out,
                "pooled_theta_rmse_generated_vs_test={}",
                s.pooled_theta_rmse_generated_vs_test
            )?;
            writeln!(
                out,
                "pooled_theta_rmse_train_vs_test={}",
                s.pooled_theta_rmse_train_vs_test
            )?;
            writeln!(
                out,
                "theta3_rmse_generated_vs_test={}",
                s.theta3_rmse_generated_vs_test
            )?;
            writeln!(
                out,
                "theta3_rmse_train_vs_test={}",
                s.theta3_rmse_train_vs_test
            )?;
            writeln!(
                out,
                "mean_theta_generated_minus_test={}",
                s.mean_theta_generated_minus_test
            )?;
            writeln!(
                out,
                "raw_theta_range_train={},{}",
                s.raw_theta_range_train.0, s.raw_theta_range_train.1
            )?;
            writeln!(
                out,
                "raw_theta_range_test={},{}",
                s.raw_theta_range_test.0, s.raw_theta_range_test.1
            )?;
            writeln!(
                out,
                "raw_theta_range_generated={},{}",
                s.raw_theta_range_generated.0, s.raw_theta_range_generated.1
            )?;
            out.flush()?;
            written.push(path);
        }

        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{synth_dataset, SplitTag, SynthSpec};
    use crate::margins::{FitOptions, GevParams};

    fn pipeline(days: usize, seeds: (u64, u64, u64)) -> (Dataset, Dataset, Dataset, MarginalModel) {
        let spec = SynthSpec {
            channels: 2,
            height: 4,
            width: 4,
            days,
            correlation_length: 1.5,
            cross_channel_correlation: 0.5,
            margins: vec![
                GevParams::new(0.2, 10.0, 2.0).unwrap(),
                GevParams::new(0.0, 5.0, 1.0).unwrap(),
            ],
            masked_border: 1,
        };
        let train = synth_dataset(&spec, seeds.0).unwrap();
        let test = synth_dataset(&spec, seeds.1)
            .unwrap()
            .with_split_tag(SplitTag::Test);
        let (model, _) = MarginalModel::fit(&train, &FitOptions::default()).unwrap();
        let generated = model
            .pit(&synth_dataset(&spec, seeds.2).unwrap())
            .unwrap()
            .with_split_tag(SplitTag::Generated);
        (train, test, generated, model)
    }

    #[test]
    fn generated_equal_to_test_gives_zero_rmse() {
        let (train, test, _, model) = pipeline(60, (1, 2, 3));
        let test_u = model.pit(&test).unwrap();
        let report = compare_sets(&train, &test, &test_u, &model).unwrap();
        assert_eq!(report.summary.pooled_theta_rmse_generated_vs_test, 0.0);
        assert_eq!(report.summary.theta3_rmse_generated_vs_test, 0.0);
        for ch in &report.summary.channels {
            assert_eq!(ch.theta_rmse_generated_vs_test, 0.0);
            assert_eq!(ch.pearson_rmse_generated_vs_test, 0.0);
        }
        assert_eq!(report.summary.mean_theta_generated_minus_test, 0.0);
    }

    #[test]
    fn identical_distributions_give_comparable_qq_vectors() {
        let (train, test, generated, model) = pipeline(400, (4, 5, 6));
        let report = compare_sets(&train, &test, &generated, &model).unwrap();
        // same generating process for all three sets: pooled RMSEs stay
        // within loose Monte-Carlo bands
        assert!(report.summary.pooled_theta_rmse_generated_vs_test < 0.3);
        assert!(report.summary.pooled_theta_rmse_train_vs_test < 0.3);
    }

    #[test]
    fn report_on_padded_grid_has_396_pixel_matrices() {
        let spec = SynthSpec {
            channels: 1,
            height: 20,
            width: 24,
            days: 40,
            correlation_length: 3.0,
            cross_channel_correlation: 0.0,
            margins: vec![GevParams::new(0.1, 5.0, 1.0).unwrap()],
            masked_border: 1,
        };
        let train = synth_dataset(&spec, 7).unwrap();
        let (model, _) = MarginalModel::fit(&train, &FitOptions::default()).unwrap();
        let u = model.pit(&train).unwrap();
        let report = compare_sets(&train, &train, &u, &model).unwrap();
        // 18x22 interior of the zero-padded 20x24 grid
        assert_eq!(report.summary.pixels, 396);
        assert_eq!(report.summary.pairs, 396 * 395 / 2);
    }

    #[test]
    fn save_writes_the_fixed_filename_set() {
        let (train, test, generated, model) = pipeline(60, (8, 9, 10));
        let report = compare_sets(&train, &test, &generated, &model).unwrap();
        let dir = tempfile::tempdir().unwrap();
        report.save(dir.path()).unwrap();
        for f in [
            "theta_pairs_ch0.csv",
            "theta_pairs_ch1.csv",
            "chi_pairs_ch0.csv",
            "chi_pairs_ch1.csv",
            "pearson_ch0.csv",
            "pearson_ch1.csv",
            "theta_3d_map.csv",
            "qq_train_vs_test.csv",
            "qq_generated_vs_test.csv",
            "summary.txt",
        ] {
            assert!(dir.path().join(f).exists(), "missing {}", f);
        }
        let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
        assert!(summary.contains("pixels=4"));
        assert!(summary.contains("mean_theta_generated_minus_test="));
    }

    #[test]
    fn original_scale_generated_input_is_rejected() {
        let (train, test, _, model) = pipeline(60, (11, 12, 13));
        let err = compare_sets(&train, &test, &test, &model).unwrap_err();
        assert!(err.to_string().contains("uniform"), "{}", err);
    }
}
