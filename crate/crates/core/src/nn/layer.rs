//! Layer definitions, parameter state, and forward/backward dispatch.

use ndarray::{Array1, Array2, Array4, ArrayD, Axis, IxDyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

use super::conv;
use super::tensor::Tensor4;

/// Per-side spatial padding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pad2 {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl Pad2 {
    pub fn symmetric(vertical: usize, horizontal: usize) -> Self {
        Self {
            top: vertical,
            bottom: vertical,
            left: horizontal,
            right: horizontal,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// One layer of the fixed sequence networks used here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LayerSpec {
    Dense {
        in_features: usize,
        out_features: usize,
    },
    Conv {
        in_channels: usize,
        out_channels: usize,
        filter: usize,
        stride: (usize, usize),
        pad: Pad2,
    },
    Deconv {
        in_channels: usize,
        out_channels: usize,
        filter: usize,
        stride: (usize, usize),
        pad: Pad2,
        output_pad: (usize, usize),
    },
    BatchNorm {
        features: usize,
        momentum: f64,
        eps: f64,
    },
    Dropout {
        rate: f64,
    },
    LeakyRelu {
        slope: f64,
    },
    Sigmoid,
    /// `[b, c*h*w, 1, 1] -> [b, c, h, w]`
    Reshape {
        channels: usize,
        height: usize,
        width: usize,
    },
    /// `[b, c, h, w] -> [b, c*h*w, 1, 1]`
    Flatten,
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::Deconv { .. } => "deconv",
            LayerSpec::BatchNorm { .. } => "batchnorm",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::LeakyRelu { .. } => "lrelu",
            LayerSpec::Sigmoid => "sigmoid",
            LayerSpec::Reshape { .. } => "reshape",
            LayerSpec::Flatten => "flatten",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match *self {
            LayerSpec::Dense {
                in_features,
                out_features,
            } => {
                if in_features == 0 || out_features == 0 {
                    return bad("dense features must be >= 1".into());
                }
            }
            LayerSpec::Conv { in_channels, out_channels, filter, stride, .. }
            | LayerSpec::Deconv { in_channels, out_channels, filter, stride, .. } => {
                if in_channels == 0 || out_channels == 0 {
                    return bad(format!("{}: channels must be >= 1", self.kind()));
                }
                if filter == 0 {
                    return bad(format!("{}: filter size must be >= 1", self.kind()));
                }
                if stride.0 == 0 || stride.1 == 0 {
                    return bad(format!("{}: stride must be >= 1", self.kind()));
                }
                if let LayerSpec::Deconv { output_pad, stride, .. } = *self {
                    if output_pad.0 >= stride.0 || output_pad.1 >= stride.1 {
                        return bad("deconv: output padding must be smaller than stride".into());
                    }
                }
            }
            LayerSpec::BatchNorm { features, momentum, eps } => {
                if features == 0 {
                    return bad("batchnorm features must be >= 1".into());
                }
                if !(0.0..1.0).contains(&momentum) || !(eps > 0.0) {
                    return bad(format!(
                        "batchnorm: momentum {} or eps {} out of range",
                        momentum, eps
                    ));
                }
            }
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(&rate) {
                    return bad(format!("dropout rate must lie in [0, 1), got {}", rate));
                }
            }
            LayerSpec::LeakyRelu { slope } => {
                if !(slope > 0.0 && slope < 1.0) {
                    return bad(format!("leaky relu slope must lie in (0, 1), got {}", slope));
                }
            }
            LayerSpec::Sigmoid | LayerSpec::Flatten => {}
            LayerSpec::Reshape { channels, height, width } => {
                if channels == 0 || height == 0 || width == 0 {
                    return bad("reshape target dims must be >= 1".into());
                }
            }
        }
        Ok(())
    }

    /// Output `(c, h, w)` for an input of shape `(c, h, w)`.
    pub fn output_shape(&self, input: (usize, usize, usize)) -> Result<(usize, usize, usize)> {
        let (c, h, w) = input;
        let err = |msg: String| Err(Error::Shape(format!("{}: {}", self.kind(), msg)));
        match *self {
            LayerSpec::Dense { in_features, out_features } => {
                if (h, w) != (1, 1) || c != in_features {
                    return err(format!(
                        "expected flat input of {} features, got {}x{}x{}",
                        in_features, c, h, w
                    ));
                }
                Ok((out_features, 1, 1))
            }
            LayerSpec::Conv { in_channels, out_channels, filter, stride, pad } => {
                if c != in_channels {
                    return err(format!("expected {} input channels, got {}", in_channels, c));
                }
                let hp = h + pad.top + pad.bottom;
                let wp = w + pad.left + pad.right;
                if hp < filter || wp < filter {
                    return err(format!("padded input {}x{} smaller than filter {}", hp, wp, filter));
                }
                Ok((
                    out_channels,
                    (hp - filter) / stride.0 + 1,
                    (wp - filter) / stride.1 + 1,
                ))
            }
            LayerSpec::Deconv { in_channels, out_channels, filter, stride, pad, output_pad } => {
                if c != in_channels {
                    return err(format!("expected {} input channels, got {}", in_channels, c));
                }
                let full_h = (h - 1) * stride.0 + filter + output_pad.0;
                let full_w = (w - 1) * stride.1 + filter + output_pad.1;
                if full_h <= pad.top + pad.bottom || full_w <= pad.left + pad.right {
                    return err(format!(
                        "padding {:?} consumes the whole {}x{} output",
                        pad, full_h, full_w
                    ));
                }
                Ok((
                    out_channels,
                    full_h - pad.top - pad.bottom,
                    full_w - pad.left - pad.right,
                ))
            }
            LayerSpec::BatchNorm { features, .. } => {
                if c != features {
                    return err(format!("expected {} channels, got {}", features, c));
                }
                Ok((c, h, w))
            }
            LayerSpec::Dropout { .. } | LayerSpec::LeakyRelu { .. } | LayerSpec::Sigmoid => {
                Ok((c, h, w))
            }
            LayerSpec::Reshape { channels, height, width } => {
                if (h, w) != (1, 1) || c != channels * height * width {
                    return err(format!(
                        "cannot reshape {}x{}x{} into {}x{}x{}",
                        c, h, w, channels, height, width
                    ));
                }
                Ok((channels, height, width))
            }
            LayerSpec::Flatten => Ok((c * h * w, 1, 1)),
        }
    }
}

/// Trainable and non-trainable arrays of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerState {
    /// Dense/conv/deconv: `[weight, bias]`; batchnorm: `[gamma, beta]`.
    pub trainable: Vec<ArrayD<f64>>,
    /// Batchnorm running `[mean, variance]`.
    pub running: Vec<ArrayD<f64>>,
}

impl LayerState {
    pub fn empty() -> Self {
        Self {
            trainable: Vec::new(),
            running: Vec::new(),
        }
    }

    pub fn trainable_len(&self) -> usize {
        self.trainable.iter().map(|a| a.len()).sum()
    }

    pub fn running_len(&self) -> usize {
        self.running.iter().map(|a| a.len()).sum()
    }
}

/// Initial state: truncated-normal weights (std 0.02), zero biases,
/// unit-gain batchnorm with zero running mean and unit running variance.
pub fn init_state(spec: &LayerSpec, stream: &mut Stream) -> LayerState {
    const WEIGHT_STD: f64 = 0.02;
    let mut trunc = |shape: Vec<usize>| -> ArrayD<f64> {
        let mut a = ArrayD::zeros(IxDyn(&shape));
        for v in a.iter_mut() {
            *v = stream.truncated_normal(WEIGHT_STD);
        }
        a
    };
    match *spec {
        LayerSpec::Dense { in_features, out_features } => LayerState {
            trainable: vec![
                trunc(vec![in_features, out_features]),
                ArrayD::zeros(IxDyn(&[out_features])),
            ],
            running: Vec::new(),
        },
        LayerSpec::Conv { in_channels, out_channels, filter, .. } => LayerState {
            trainable: vec![
                trunc(vec![out_channels, in_channels, filter, filter]),
                ArrayD::zeros(IxDyn(&[out_channels])),
            ],
            running: Vec::new(),
        },
        LayerSpec::Deconv { in_channels, out_channels, filter, .. } => LayerState {
            trainable: vec![
                trunc(vec![in_channels, out_channels, filter, filter]),
                ArrayD::zeros(IxDyn(&[out_channels])),
            ],
            running: Vec::new(),
        },
        LayerSpec::BatchNorm { features, .. } => LayerState {
            trainable: vec![
                ArrayD::from_elem(IxDyn(&[features]), 1.0),
                ArrayD::zeros(IxDyn(&[features])),
            ],
            running: vec![
                ArrayD::zeros(IxDyn(&[features])),
                ArrayD::from_elem(IxDyn(&[features]), 1.0),
            ],
        },
        _ => LayerState::empty(),
    }
}

/// What backward needs from the matching forward call.
#[derive(Clone, Debug)]
pub enum LayerCache {
    Dense {
        input: Array2<f64>,
    },
    Conv {
        input: Array4<f64>,
    },
    Deconv {
        input: Array4<f64>,
    },
    BatchNormTrain {
        x_hat: Array4<f64>,
        inv_std: Array1<f64>,
    },
    BatchNormEval {
        x_hat: Array4<f64>,
    },
    Dropout {
        mask: Array4<f64>,
    },
    LeakyRelu {
        input: Array4<f64>,
    },
    Sigmoid {
        output: Array4<f64>,
    },
    Reshape {
        in_dim: (usize, usize, usize, usize),
    },
    Identity,
}

/// Run one layer forward. Batchnorm updates its running statistics in
/// train mode, which is why the state is mutable. The output is checked
/// finite.
pub fn forward(
    spec: &LayerSpec,
    state: &mut LayerState,
    input: &Tensor4,
    mode: Mode,
    stream: &mut Stream,
) -> Result<(Tensor4, LayerCache)> {
    let (out, cache) = match spec {
        LayerSpec::Dense { in_features, .. } => {
            let flat = input.flat().map_err(|e| shape_err(spec, input, e))?;
            if flat.dim().1 != *in_features {
                return Err(shape_err(
                    spec,
                    input,
                    Error::Shape(format!("expected {} features", in_features)),
                ));
            }
            let weight = as2(&state.trainable[0]);
            let bias = as1(&state.trainable[1]);
            let out = flat.dot(&weight) + &bias;
            (Tensor4::from_flat(out)?, LayerCache::Dense { input: flat })
        }
        LayerSpec::Conv { .. } => {
            let out = conv::conv_forward(spec, state, input).map_err(|e| shape_err(spec, input, e))?;
            (out, LayerCache::Conv { input: input.data().clone() })
        }
        LayerSpec::Deconv { .. } => {
            let out =
                conv::deconv_forward(spec, state, input).map_err(|e| shape_err(spec, input, e))?;
            (out, LayerCache::Deconv { input: input.data().clone() })
        }
        LayerSpec::BatchNorm { features, momentum, eps } => {
            batchnorm_forward(*features, *momentum, *eps, state, input, mode)
                .map_err(|e| shape_err(spec, input, e))?
        }
        LayerSpec::Dropout { rate } => {
            if mode == Mode::Eval || *rate == 0.0 {
                (input.clone(), LayerCache::Identity)
            } else {
                let keep = 1.0 - rate;
                let mut mask = Array4::zeros(input.dim());
                for m in mask.iter_mut() {
                    // inverted scaling keeps the expectation unchanged
                    if stream.open_uniform() >= *rate {
                        *m = 1.0 / keep;
                    }
                }
                let out = Tensor4::new(input.data() * &mask)?;
                (out, LayerCache::Dropout { mask })
            }
        }
        LayerSpec::LeakyRelu { slope } => {
            let out = input.data().mapv(|v| if v > 0.0 { v } else { slope * v });
            (Tensor4::new(out)?, LayerCache::LeakyRelu { input: input.data().clone() })
        }
        LayerSpec::Sigmoid => {
            let out = input.data().mapv(|v| 1.0 / (1.0 + (-v).exp()));
            let t = Tensor4::new(out)?;
            let cache = LayerCache::Sigmoid { output: t.data().clone() };
            (t, cache)
        }
        LayerSpec::Reshape { channels, height, width } => {
            let (b, c, h, w) = input.dim();
            if (h, w) != (1, 1) || c != channels * height * width {
                return Err(shape_err(
                    spec,
                    input,
                    Error::Shape("input does not match reshape target".into()),
                ));
            }
            let out = input
                .data()
                .view()
                .into_shape_with_order((b, *channels, *height, *width))
                .map_err(|e| Error::Shape(format!("reshape fwd: {}", e)))?
                .to_owned();
            (Tensor4::new(out)?, LayerCache::Reshape { in_dim: (b, c, h, w) })
        }
        LayerSpec::Flatten => {
            let (b, c, h, w) = input.dim();
            let out = input
                .data()
                .view()
                .into_shape_with_order((b, c * h * w, 1, 1))
                .map_err(|e| Error::Shape(format!("flatten fwd: {}", e)))?
                .to_owned();
            (Tensor4::new(out)?, LayerCache::Reshape { in_dim: (b, c, h, w) })
        }
    };
    out.check_finite(spec.kind())?;
    Ok((out, cache))
}

/// Gradients of one layer: input gradient plus one gradient per
/// trainable array, in state order.
pub fn backward(
    spec: &LayerSpec,
    state: &LayerState,
    cache: &LayerCache,
    upstream: &Tensor4,
) -> Result<(Tensor4, Vec<ArrayD<f64>>)> {
    match (spec, cache) {
        (LayerSpec::Dense { .. }, LayerCache::Dense { input }) => {
            let grad = upstream.flat()?;
            let weight = as2(&state.trainable[0]);
            let d_input = grad.dot(&weight.t());
            let d_weight = input.t().dot(&grad);
            let d_bias = grad.sum_axis(Axis(0));
            Ok((
                Tensor4::from_flat(d_input)?,
                vec![d_weight.into_dyn(), d_bias.into_dyn()],
            ))
        }
        (LayerSpec::Conv { .. }, LayerCache::Conv { input }) => {
            conv::conv_backward(spec, state, input, upstream)
        }
        (LayerSpec::Deconv { .. }, LayerCache::Deconv { input }) => {
            conv::deconv_backward(spec, state, input, upstream)
        }
        (LayerSpec::BatchNorm { .. }, LayerCache::BatchNormTrain { x_hat, inv_std }) => {
            batchnorm_backward_train(state, x_hat, inv_std, upstream)
        }
        (LayerSpec::BatchNorm { eps, .. }, LayerCache::BatchNormEval { x_hat }) => {
            batchnorm_backward_eval(state, *eps, x_hat, upstream)
        }
        (LayerSpec::Dropout { .. }, LayerCache::Identity) => {
            Ok((upstream.clone(), Vec::new()))
        }
        (LayerSpec::Dropout { .. }, LayerCache::Dropout { mask }) => {
            Ok((Tensor4::new(upstream.data() * mask)?, Vec::new()))
        }
        (LayerSpec::LeakyRelu { slope }, LayerCache::LeakyRelu { input }) => {
            let mut d = upstream.data().clone();
            ndarray::Zip::from(&mut d).and(input).for_each(|g, &x| {
                if x <= 0.0 {
                    *g *= slope;
                }
            });
            Ok((Tensor4::new(d)?, Vec::new()))
        }
        (LayerSpec::Sigmoid, LayerCache::Sigmoid { output }) => {
            let mut d = upstream.data().clone();
            ndarray::Zip::from(&mut d).and(output).for_each(|g, &y| {
                *g *= y * (1.0 - y);
            });
            Ok((Tensor4::new(d)?, Vec::new()))
        }
        (LayerSpec::Reshape { .. }, LayerCache::Reshape { in_dim })
        | (LayerSpec::Flatten, LayerCache::Reshape { in_dim }) => {
            let out = upstream
                .data()
                .view()
                .into_shape_with_order(*in_dim)
                .map_err(|e| Error::Shape(format!("reshape bwd: {}", e)))?
                .to_owned();
            Ok((Tensor4::new(out)?, Vec::new()))
        }
        _ => Err(Error::InvalidArgument(format!(
            "{}: cache does not match layer",
            spec.kind()
        ))),
    }
}

fn shape_err(spec: &LayerSpec, input: &Tensor4, err: Error) -> Error {
    Error::Shape(format!(
        "{} layer with input {:?}: {}",
        spec.kind(),
        input.dim(),
        err
    ))
}

pub(super) fn as2(a: &ArrayD<f64>) -> Array2<f64> {
    a.view()
        .into_dimensionality()
        .expect("stored array rank")
        .to_owned()
}

pub(super) fn as1(a: &ArrayD<f64>) -> Array1<f64> {
    a.view()
        .into_dimensionality()
        .expect("stored array rank")
        .to_owned()
}

fn batchnorm_forward(
    features: usize,
    momentum: f64,
    eps: f64,
    state: &mut LayerState,
    input: &Tensor4,
    mode: Mode,
) -> Result<(Tensor4, LayerCache)> {
    let (b, c, h, w) = input.dim();
    if c != features {
        return Err(Error::Shape(format!("expected {} channels, got {}", features, c)));
    }
    let gamma = as1(&state.trainable[0]);
    let beta = as1(&state.trainable[1]);
    let m = (b * h * w) as f64;

    match mode {
        Mode::Train => {
            let mut mean = Array1::zeros(c);
            let mut var = Array1::zeros(c);
            for ci in 0..c {
                let mut acc = 0.0;
                for bi in 0..b {
                    for y in 0..h {
                        for x in 0..w {
                            acc += input.data()[[bi, ci, y, x]];
                        }
                    }
                }
                let mu = acc / m;
                let mut acc2 = 0.0;
                for bi in 0..b {
                    for y in 0..h {
                        for x in 0..w {
                            let d = input.data()[[bi, ci, y, x]] - mu;
                            acc2 += d * d;
                        }
                    }
                }
                mean[ci] = mu;
                var[ci] = acc2 / m;
            }

            let inv_std = var.mapv(|v| 1.0 / (v + eps).sqrt());
            let mut x_hat = input.data().clone();
            for ci in 0..c {
                let (mu, is) = (mean[ci], inv_std[ci]);
                x_hat
                    .index_axis_mut(Axis(1), ci)
                    .mapv_inplace(|v| (v - mu) * is);
            }
            let mut out = x_hat.clone();
            for ci in 0..c {
                let (g, be) = (gamma[ci], beta[ci]);
                out.index_axis_mut(Axis(1), ci).mapv_inplace(|v| v * g + be);
            }

            // running statistics track the batch (biased) moments
            for ci in 0..c {
                let rm = state.running[0][[ci]];
                let rv = state.running[1][[ci]];
                state.running[0][[ci]] = momentum * rm + (1.0 - momentum) * mean[ci];
                state.running[1][[ci]] = momentum * rv + (1.0 - momentum) * var[ci];
            }

            Ok((
                Tensor4::new(out)?,
                LayerCache::BatchNormTrain { x_hat, inv_std },
            ))
        }
        Mode::Eval => {
            let rm = as1(&state.running[0]);
            let rv = as1(&state.running[1]);
            let mut x_hat = input.data().clone();
            for ci in 0..c {
                let is = 1.0 / (rv[ci] + eps).sqrt();
                let mu = rm[ci];
                x_hat
                    .index_axis_mut(Axis(1), ci)
                    .mapv_inplace(|v| (v - mu) * is);
            }
            let mut out = x_hat.clone();
            for ci in 0..c {
                let (g, be) = (gamma[ci], beta[ci]);
                out.index_axis_mut(Axis(1), ci).mapv_inplace(|v| v * g + be);
            }
            Ok((Tensor4::new(out)?, LayerCache::BatchNormEval { x_hat }))
        }
    }
}

fn batchnorm_backward_train(
    state: &LayerState,
    x_hat: &Array4<f64>,
    inv_std: &Array1<f64>,
    upstream: &Tensor4,
) -> Result<(Tensor4, Vec<ArrayD<f64>>)> {
    let (b, c, h, w) = upstream.dim();
    let gamma = as1(&state.trainable[0]);
    let m = (b * h * w) as f64;

    let mut d_gamma = Array1::zeros(c);
    let mut d_beta = Array1::zeros(c);
    let mut d_input = Array4::zeros((b, c, h, w));
    for ci in 0..c {
        let mut sum_dy = 0.0;
        let mut sum_dy_xhat = 0.0;
        for bi in 0..b {
            for y in 0..h {
                for x in 0..w {
                    let dy = upstream.data()[[bi, ci, y, x]];
                    sum_dy += dy;
                    sum_dy_xhat += dy * x_hat[[bi, ci, y, x]];
                }
            }
        }
        d_gamma[ci] = sum_dy_xhat;
        d_beta[ci] = sum_dy;

        let scale = gamma[ci] * inv_std[ci];
        let mean_dy = sum_dy / m;
        let mean_dy_xhat = sum_dy_xhat / m;
        for bi in 0..b {
            for y in 0..h {
                for x in 0..w {
                    let dy = upstream.data()[[bi, ci, y, x]];
                    d_input[[bi, ci, y, x]] =
                        scale * (dy - mean_dy - x_hat[[bi, ci, y, x]] * mean_dy_xhat);
                }
            }
        }
    }
    Ok((
        Tensor4::new(d_input)?,
        vec![d_gamma.into_dyn(), d_beta.into_dyn()],
    ))
}

fn batchnorm_backward_eval(
    state: &LayerState,
    eps: f64,
    x_hat: &Array4<f64>,
    upstream: &Tensor4,
) -> Result<(Tensor4, Vec<ArrayD<f64>>)> {
    // eval mode normalises with fixed running statistics, so the map is
    // affine per channel
    let c = upstream.dim().1;
    let gamma = as1(&state.trainable[0]);
    let rv = as1(&state.running[1]);

    let mut d_gamma = Array1::zeros(c);
    let mut d_beta = Array1::zeros(c);
    for ci in 0..c {
        let dy = upstream.data().index_axis(Axis(1), ci);
        let xh = x_hat.index_axis(Axis(1), ci);
        d_beta[ci] = dy.sum();
        d_gamma[ci] = dy.iter().zip(xh.iter()).map(|(a, b)| a * b).sum();
    }

    let mut d_input = upstream.data().clone();
    for ci in 0..c {
        let scale = gamma[ci] / (rv[ci] + eps).sqrt();
        d_input.index_axis_mut(Axis(1), ci).mapv_inplace(|v| v * scale);
    }
    Ok((
        Tensor4::new(d_input)?,
        vec![d_gamma.into_dyn(), d_beta.into_dyn()],
    ))
}
