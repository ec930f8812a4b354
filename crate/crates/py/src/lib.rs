//! Python bindings for the hazardgen pipeline.

use std::path::PathBuf;

use numpy::{IntoPyArray, PyArray2, PyArray3, PyArray4, PyReadonlyArray2, PyReadonlyArray4};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use hazardgen_core as core;
use hazardgen_core::diag;
use hazardgen_core::gan;
use hazardgen_core::grid;
use hazardgen_core::margins;
use hazardgen_core::nn;

fn to_py_err(e: core::Error) -> PyErr {
    match e {
        core::Error::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn cadence_from_str(s: &str) -> PyResult<grid::Cadence> {
    match s {
        "hourly" => Ok(grid::Cadence::Hourly),
        "daily-max" => Ok(grid::Cadence::DailyMax),
        _ => Err(PyValueError::new_err(format!(
            "cadence must be 'hourly' or 'daily-max', got {:?}",
            s
        ))),
    }
}

fn split_from_str(s: &str) -> PyResult<grid::SplitTag> {
    match s {
        "train" => Ok(grid::SplitTag::Train),
        "test" => Ok(grid::SplitTag::Test),
        "generated" => Ok(grid::SplitTag::Generated),
        _ => Err(PyValueError::new_err(format!(
            "split must be 'train', 'test' or 'generated', got {:?}",
            s
        ))),
    }
}

/// Multichannel gridded dataset (`[N, C, H, W]` with a validity mask).
#[pyclass(name = "Dataset")]
#[derive(Clone)]
struct PyDataset {
    inner: grid::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Build from a `[N, C, H, W]` array; `mask` is `[H, W]` bools
    /// (None means every pixel is valid).
    #[new]
    #[pyo3(signature = (values, mask=None, cadence="daily-max", split="train"))]
    fn new(
        values: PyReadonlyArray4<'_, f64>,
        mask: Option<PyReadonlyArray2<'_, bool>>,
        cadence: &str,
        split: &str,
    ) -> PyResult<Self> {
        let values = values.as_array().to_owned();
        let (_, c, h, w) = values.dim();
        let mask = match mask {
            Some(m) => m.as_array().to_owned(),
            None => ndarray::Array2::from_elem((h, w), true),
        };
        let names = (0..c).map(|i| format!("ch{}", i)).collect();
        let inner = grid::Dataset::from_values(
            values,
            names,
            mask,
            cadence_from_str(cadence)?,
            split_from_str(split)?,
        )
        .map_err(to_py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: grid::load_dataset(&path).map_err(to_py_err)?,
        })
    }

    /// Synthetic Gaussian-copula dataset with known GEV marginals.
    #[staticmethod]
    #[pyo3(signature = (channels, height, width, days, correlation_length, cross_channel_correlation, shapes, locations, scales, masked_border=0, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn synth(
        channels: usize,
        height: usize,
        width: usize,
        days: usize,
        correlation_length: f64,
        cross_channel_correlation: f64,
        shapes: Vec<f64>,
        locations: Vec<f64>,
        scales: Vec<f64>,
        masked_border: usize,
        seed: u64,
    ) -> PyResult<Self> {
        if shapes.len() != channels || locations.len() != channels || scales.len() != channels {
            return Err(PyValueError::new_err(
                "shapes/locations/scales must each have one entry per channel",
            ));
        }
        let margins = shapes
            .iter()
            .zip(&locations)
            .zip(&scales)
            .map(|((&s, &l), &sc)| margins::GevParams::new(s, l, sc))
            .collect::<core::Result<Vec<_>>>()
            .map_err(to_py_err)?;
        let spec = grid::SynthSpec {
            channels,
            height,
            width,
            days,
            correlation_length,
            cross_channel_correlation,
            margins,
            masked_border,
        };
        Ok(Self {
            inner: grid::synth_dataset(&spec, seed).map_err(to_py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        grid::save_dataset(&self.inner, &path).map_err(to_py_err)
    }

    fn values<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray4<f64>> {
        self.inner.values().clone().into_pyarray(py)
    }

    fn mask<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<bool>> {
        self.inner.valid_mask().clone().into_pyarray(py)
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize, usize) {
        let (c, h, w) = self.inner.field_shape();
        (self.inner.len(), c, h, w)
    }

    #[getter]
    fn cadence(&self) -> &'static str {
        match self.inner.cadence() {
            grid::Cadence::Hourly => "hourly",
            grid::Cadence::DailyMax => "daily-max",
        }
    }

    #[getter]
    fn split(&self) -> &'static str {
        self.inner.split_tag().label()
    }

    fn with_split(&self, split: &str) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.clone().with_split_tag(split_from_str(split)?),
        })
    }

    /// Per-pixel maxima over consecutive blocks of `hours_per_block`.
    fn daily_maxima(&self, hours_per_block: usize) -> PyResult<Self> {
        Ok(Self {
            inner: grid::daily_maxima(&self.inner, hours_per_block).map_err(to_py_err)?,
        })
    }

    /// Bilinear resample (half-pixel centres) of every field.
    fn resize(&self, height: usize, width: usize) -> PyResult<Self> {
        Ok(Self {
            inner: grid::resize_dataset(&self.inner, height, width).map_err(to_py_err)?,
        })
    }

    /// Centre every field in a larger zero grid; padding is masked out.
    fn zero_pad(&self, height: usize, width: usize) -> PyResult<Self> {
        Ok(Self {
            inner: grid::zero_pad_dataset(&self.inner, height, width).map_err(to_py_err)?,
        })
    }

    fn __repr__(&self) -> String {
        let (c, h, w) = self.inner.field_shape();
        format!(
            "Dataset(n={}, channels={}, grid={}x{}, cadence={}, split={})",
            self.inner.len(),
            c,
            h,
            w,
            self.cadence(),
            self.split()
        )
    }
}

/// GEV distribution (shape, location, scale).
#[pyclass(name = "GevParams")]
#[derive(Clone)]
struct PyGevParams {
    inner: margins::GevParams,
}

#[pymethods]
impl PyGevParams {
    #[new]
    fn new(shape: f64, location: f64, scale: f64) -> PyResult<Self> {
        Ok(Self {
            inner: margins::GevParams::new(shape, location, scale).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn shape(&self) -> f64 {
        self.inner.shape()
    }

    #[getter]
    fn location(&self) -> f64 {
        self.inner.location()
    }

    #[getter]
    fn scale(&self) -> f64 {
        self.inner.scale()
    }

    fn cdf(&self, x: f64) -> PyResult<f64> {
        self.inner.cdf(x).map_err(to_py_err)
    }

    fn quantile(&self, u: f64) -> PyResult<f64> {
        self.inner.quantile(u).map_err(to_py_err)
    }

    fn log_likelihood(&self, samples: Vec<f64>) -> f64 {
        self.inner.log_likelihood(&samples)
    }

    /// Maximum-likelihood fit; returns (params, log_likelihood, converged).
    #[staticmethod]
    fn fit(samples: Vec<f64>) -> PyResult<(Self, f64, bool)> {
        let fit = margins::fit_gev(&samples).map_err(to_py_err)?;
        Ok((
            Self { inner: fit.params },
            fit.log_likelihood,
            fit.converged,
        ))
    }

    fn __repr__(&self) -> String {
        format!(
            "GevParams(shape={}, location={}, scale={})",
            self.inner.shape(),
            self.inner.location(),
            self.inner.scale()
        )
    }
}

/// Per-pixel-per-channel marginal model (empirical CDF + fitted GEV).
#[pyclass(name = "MarginalModel")]
struct PyMarginalModel {
    inner: margins::MarginalModel,
}

#[pymethods]
impl PyMarginalModel {
    /// Fit one marginal per valid pixel-channel; returns
    /// (model, unconverged pixel list).
    #[staticmethod]
    #[pyo3(signature = (data, block_days=1))]
    fn fit(data: &PyDataset, block_days: usize) -> PyResult<(Self, Vec<(usize, usize, usize)>)> {
        let (model, report) =
            margins::MarginalModel::fit(&data.inner, &margins::FitOptions { block_days })
                .map_err(to_py_err)?;
        Ok((Self { inner: model }, report.unconverged))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: margins::MarginalModel::load(&path).map_err(to_py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py_err)
    }

    /// Probability integral transform to uniform marginals.
    fn pit(&self, data: &PyDataset) -> PyResult<PyDataset> {
        Ok(PyDataset {
            inner: self.inner.pit(&data.inner).map_err(to_py_err)?,
        })
    }

    /// Inverse transform through the fitted GEV quantile functions.
    fn inverse_pit(&self, uniforms: &PyDataset) -> PyResult<PyDataset> {
        Ok(PyDataset {
            inner: self.inner.inverse_pit(&uniforms.inner).map_err(to_py_err)?,
        })
    }

    /// `(shape, location, scale)` maps, each `[C, H, W]` with NaN at
    /// masked pixels.
    fn parameter_maps<'py>(
        &self,
        py: Python<'py>,
    ) -> (
        Bound<'py, PyArray3<f64>>,
        Bound<'py, PyArray3<f64>>,
        Bound<'py, PyArray3<f64>>,
    ) {
        let (s, l, sc) = self.inner.parameter_maps();
        (s.into_pyarray(py), l.into_pyarray(py), sc.into_pyarray(py))
    }

    fn gev(&self, channel: usize, y: usize, x: usize) -> Option<PyGevParams> {
        self.inner
            .marginal(channel, y, x)
            .map(|pm| PyGevParams { inner: pm.gev })
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        self.inner.field_shape()
    }
}

/// Trained or initialised network parameters.
#[pyclass(name = "Network")]
struct PyNetwork {
    inner: nn::NetworkParams,
}

#[pymethods]
impl PyNetwork {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: nn::load_network(&path).map_err(to_py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        nn::save_network(&self.inner, &path).map_err(to_py_err)
    }

    fn audit(&self, name: &str) -> PyResult<String> {
        Ok(self.inner.audit(name).map_err(to_py_err)?.to_string())
    }

    #[getter]
    fn trainable_count(&self) -> usize {
        self.inner.trainable_count()
    }

    #[getter]
    fn non_trainable_count(&self) -> usize {
        self.inner.non_trainable_count()
    }
}

/// Train the GAN on a uniform-scale dataset. `config_text` uses the
/// `key=value` format of the CLI; missing keys take the tuned defaults.
/// Returns (generator, discriminator, history) with history rows
/// (epoch, d_loss, g_loss).
#[pyfunction]
#[pyo3(signature = (data, config_text=None))]
fn train_gan(
    data: &PyDataset,
    config_text: Option<&str>,
) -> PyResult<(PyNetwork, PyNetwork, Vec<(usize, f64, f64)>)> {
    let cfg = match config_text {
        Some(text) => gan::TrainConfig::parse(text).map_err(to_py_err)?,
        None => gan::TrainConfig::default(),
    };
    let (c, h, w) = data.inner.field_shape();
    let (gspec, dspec) = if (h, w) == (20, 24) {
        (
            gan::GeneratorSpec::reference(c, cfg.lrelu, cfg.dropout),
            gan::DiscriminatorSpec::reference(c, cfg.lrelu, cfg.dropout),
        )
    } else {
        (
            gan::GeneratorSpec::for_grid(c, (h, w), 128, vec![64, 64], cfg.lrelu, cfg.dropout),
            gan::DiscriminatorSpec::for_grid(c, (h, w), vec![32, 64, 128], cfg.lrelu, cfg.dropout),
        )
    };
    let result =
        gan::train(&data.inner, &gspec, &dspec, &cfg, |_, _, _| Ok(())).map_err(to_py_err)?;
    let history = result
        .history
        .iter()
        .map(|e| (e.epoch, e.d_loss, e.g_loss))
        .collect();
    Ok((
        PyNetwork {
            inner: result.generator,
        },
        PyNetwork {
            inner: result.discriminator,
        },
        history,
    ))
}

/// Draw `count` uniform-scale events from a generator network.
#[pyfunction]
fn sample_events(generator: &PyNetwork, count: usize, seed: u64) -> PyResult<PyDataset> {
    Ok(PyDataset {
        inner: gan::sample_events(&generator.inner, count, seed).map_err(to_py_err)?,
    })
}

/// Unit-Fréchet transform `Y = -1/ln(U)` of a uniform-scale dataset.
#[pyfunction]
fn to_frechet(uniforms: &PyDataset) -> PyResult<PyDataset> {
    Ok(PyDataset {
        inner: margins::to_frechet(&uniforms.inner).map_err(to_py_err)?,
    })
}

/// Extremal coefficient of D unit-Fréchet components sampled N times;
/// `components` is `[D][N]`. Returns (raw, clamped).
#[pyfunction]
fn extremal_coefficient(components: Vec<Vec<f64>>) -> PyResult<(f64, f64)> {
    let refs: Vec<&[f64]> = components.iter().map(|c| c.as_slice()).collect();
    let est = diag::extremal_coefficient(&refs).map_err(to_py_err)?;
    Ok((est.raw, est.clamped))
}

/// Pairwise extremal correlation from a clamped pairwise coefficient.
#[pyfunction]
fn extremal_correlation(theta_pair: f64) -> PyResult<f64> {
    diag::extremal_correlation(theta_pair).map_err(to_py_err)
}

/// Pairwise extremal coefficients between valid pixels of one channel
/// of a uniform-scale dataset. Returns (matrix, pixel coordinates).
#[pyfunction]
fn pairwise_theta<'py>(
    py: Python<'py>,
    uniforms: &PyDataset,
    channel: usize,
) -> PyResult<(Bound<'py, PyArray2<f64>>, Vec<(usize, usize)>)> {
    let map = diag::pairwise_theta_map(&uniforms.inner, channel).map_err(to_py_err)?;
    Ok((map.values.into_pyarray(py), map.pixels))
}

/// Pearson correlation matrix between valid pixels of one channel.
#[pyfunction]
fn pearson<'py>(
    py: Python<'py>,
    data: &PyDataset,
    channel: usize,
) -> PyResult<(Bound<'py, PyArray2<f64>>, Vec<(usize, usize)>)> {
    let m = diag::pearson_matrix(&data.inner, channel).map_err(to_py_err)?;
    Ok((m.values.into_pyarray(py), m.pixels))
}

/// Paired sorted quantile vectors for a Q-Q plot.
#[pyfunction]
fn qq_vectors(a: Vec<f64>, b: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    diag::qq_vectors(&a, &b).map_err(to_py_err)
}

/// Full dependence report; writes the CSV set to `out_dir` when given.
/// Returns a summary dict.
#[pyfunction]
#[pyo3(signature = (train, test, generated_uniform, model, out_dir=None))]
fn compare_sets<'py>(
    py: Python<'py>,
    train: &PyDataset,
    test: &PyDataset,
    generated_uniform: &PyDataset,
    model: &PyMarginalModel,
    out_dir: Option<PathBuf>,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let report = diag::compare_sets(
        &train.inner,
        &test.inner,
        &generated_uniform.inner,
        &model.inner,
    )
    .map_err(to_py_err)?;
    if let Some(dir) = out_dir {
        report.save(&dir).map_err(to_py_err)?;
    }
    let s = &report.summary;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("pixels", s.pixels)?;
    d.set_item("pairs", s.pairs)?;
    d.set_item(
        "pooled_theta_rmse_generated_vs_test",
        s.pooled_theta_rmse_generated_vs_test,
    )?;
    d.set_item(
        "pooled_theta_rmse_train_vs_test",
        s.pooled_theta_rmse_train_vs_test,
    )?;
    d.set_item(
        "theta3_rmse_generated_vs_test",
        s.theta3_rmse_generated_vs_test,
    )?;
    d.set_item(
        "mean_theta_generated_minus_test",
        s.mean_theta_generated_minus_test,
    )?;
    let per_channel = pyo3::types::PyDict::new(py);
    for ch in &s.channels {
        let row = pyo3::types::PyDict::new(py);
        row.set_item(
            "theta_rmse_generated_vs_test",
            ch.theta_rmse_generated_vs_test,
        )?;
        row.set_item("theta_rmse_train_vs_test", ch.theta_rmse_train_vs_test)?;
        row.set_item(
            "pearson_rmse_generated_vs_test",
            ch.pearson_rmse_generated_vs_test,
        )?;
        row.set_item("pearson_rmse_train_vs_test", ch.pearson_rmse_train_vs_test)?;
        per_channel.set_item(ch.name.clone(), row)?;
    }
    d.set_item("channels", per_channel)?;
    Ok(d)
}

/// Finite-difference check of every backward pass in a small network.
#[pyfunction]
fn gradient_check_report(seed: u64) -> PyResult<String> {
    let spec = gan::GeneratorSpec {
        latent_dim: 8,
        base: (16, 2, 2),
        hidden_filters: vec![8, 8],
        out_channels: 2,
        out_hw: (8, 8),
        lrelu_slope: 0.3,
        dropout_rate: 0.4,
    };
    let layers = spec.layers().map_err(to_py_err)?;
    let report = nn::gradient_check(&layers, (2, 8, 1, 1), seed).map_err(to_py_err)?;
    Ok(report.to_string())
}

/// Cap worker threads used by parallel sections.
#[pyfunction]
fn set_max_threads(threads: usize) {
    core::set_max_threads(threads.max(1));
}

#[pymodule]
fn hazardgen_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyGevParams>()?;
    m.add_class::<PyMarginalModel>()?;
    m.add_class::<PyNetwork>()?;
    m.add_function(wrap_pyfunction!(train_gan, m)?)?;
    m.add_function(wrap_pyfunction!(sample_events, m)?)?;
    m.add_function(wrap_pyfunction!(to_frechet, m)?)?;
    m.add_function(wrap_pyfunction!(extremal_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(extremal_correlation, m)?)?;
    m.add_function(wrap_pyfunction!(pairwise_theta, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(qq_vectors, m)?)?;
    m.add_function(wrap_pyfunction!(compare_sets, m)?)?;
    m.add_function(wrap_pyfunction!(gradient_check_report, m)?)?;
    m.add_function(wrap_pyfunction!(set_max_threads, m)?)?;
    m.add("__version__", core::VERSION)?;
    Ok(())
}
