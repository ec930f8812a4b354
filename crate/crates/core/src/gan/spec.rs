//! Generator and discriminator architectures.
//!
//! Filter size and stride follow the reference architecture this
//! implementation reproduces (dense to a coarse grid, two stride-2
//! transposed convolutions, a stride-1 output deconvolution; three
//! convolutions in the discriminator). Per-layer padding and output
//! padding are solved from the declared shape chain, so the achieved
//! parameter counts differ from the reference totals; audits print
//! both (see [`REFERENCE_GENERATOR_TRAINABLE`]).

use crate::error::{Error, Result};
use crate::nn::{LayerSpec, NetworkParams, Pad2};
use crate::rng::RunRng;

/// Published trainable-parameter total of the reference generator.
pub const REFERENCE_GENERATOR_TRAINABLE: usize = 10_490_883;
/// Published overall parameter total of the reference discriminator.
pub const REFERENCE_DISCRIMINATOR_TOTAL: usize = 405_057;
/// Published trainable subset of the reference discriminator.
pub const REFERENCE_DISCRIMINATOR_TRAINABLE: usize = 404_289;

/// Filter size used by every convolutional layer.
pub const FILTER_SIZE: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSpec {
    pub latent_dim: usize,
    /// `(channels, height, width)` the dense output reshapes into.
    pub base: (usize, usize, usize),
    /// Filter counts of the stride-2 transposed convolutions.
    pub hidden_filters: Vec<usize>,
    pub out_channels: usize,
    pub out_hw: (usize, usize),
    pub lrelu_slope: f64,
    pub dropout_rate: f64,
}

impl GeneratorSpec {
    /// Reference architecture: latent 100, dense to 25,600 units
    /// reshaped to 1024x5x5, two 512-filter stride-2 deconvolutions,
    /// and a stride-1 output deconvolution onto a 20x24 grid.
    pub fn reference(out_channels: usize, lrelu_slope: f64, dropout_rate: f64) -> Self {
        Self {
            latent_dim: 100,
            base: (1024, 5, 5),
            hidden_filters: vec![512, 512],
            out_channels,
            out_hw: (20, 24),
            lrelu_slope,
            dropout_rate,
        }
    }

    /// Scaled-down architecture for an arbitrary grid: the base spatial
    /// size is `ceil(h/4) x ceil(w/4)` so the two stride-2 layers close
    /// the chain.
    pub fn for_grid(
        out_channels: usize,
        out_hw: (usize, usize),
        base_channels: usize,
        hidden_filters: Vec<usize>,
        lrelu_slope: f64,
        dropout_rate: f64,
    ) -> Self {
        Self {
            latent_dim: 100,
            base: (base_channels, out_hw.0.div_ceil(4), out_hw.1.div_ceil(4)),
            hidden_filters,
            out_channels,
            out_hw,
            lrelu_slope,
            dropout_rate,
        }
    }

    pub fn dense_units(&self) -> usize {
        self.base.0 * self.base.1 * self.base.2
    }

    /// The layer sequence, with padding solved per deconvolution.
    pub fn layers(&self) -> Result<Vec<LayerSpec>> {
        if self.hidden_filters.is_empty() {
            return Err(Error::InvalidArgument(
                "generator needs at least one hidden deconvolution".into(),
            ));
        }
        let mut layers = vec![
            LayerSpec::Dense {
                in_features: self.latent_dim,
                out_features: self.dense_units(),
            },
            LayerSpec::Reshape {
                channels: self.base.0,
                height: self.base.1,
                width: self.base.2,
            },
        ];
        let mut chain = vec![(self.base.1, self.base.2)];
        let mut channels = self.base.0;
        let steps = self.hidden_filters.len() as u32;

        for (k, &filters) in self.hidden_filters.iter().enumerate() {
            layers.push(LayerSpec::BatchNorm {
                features: channels,
                momentum: 0.99,
                eps: 1e-5,
            });
            layers.push(LayerSpec::LeakyRelu {
                slope: self.lrelu_slope,
            });
            layers.push(LayerSpec::Dropout {
                rate: self.dropout_rate,
            });
            let (h, w) = *chain.last().unwrap();
            let remaining = steps - k as u32 - 1;
            let target = (
                self.out_hw.0.div_ceil(2usize.pow(remaining)),
                self.out_hw.1.div_ceil(2usize.pow(remaining)),
            );
            let (pad_v, op_v) = solve_deconv(h, target.0, 2).ok_or_else(|| {
                chain_error("generator", &chain, h, target.0)
            })?;
            let (pad_h, op_h) = solve_deconv(w, target.1, 2).ok_or_else(|| {
                chain_error("generator", &chain, w, target.1)
            })?;
            layers.push(LayerSpec::Deconv {
                in_channels: channels,
                out_channels: filters,
                filter: FILTER_SIZE,
                stride: (2, 2),
                pad: Pad2 {
                    top: pad_v,
                    bottom: pad_v,
                    left: pad_h,
                    right: pad_h,
                },
                output_pad: (op_v, op_h),
            });
            chain.push(target);
            channels = filters;
        }

        layers.push(LayerSpec::BatchNorm {
            features: channels,
            momentum: 0.99,
            eps: 1e-5,
        });
        layers.push(LayerSpec::LeakyRelu {
            slope: self.lrelu_slope,
        });
        layers.push(LayerSpec::Dropout {
            rate: self.dropout_rate,
        });
        // stride-1 output deconvolution keeps the grid size
        let (h, w) = *chain.last().unwrap();
        if (h, w) != self.out_hw {
            return Err(chain_error("generator", &chain, h, self.out_hw.0));
        }
        layers.push(LayerSpec::Deconv {
            in_channels: channels,
            out_channels: self.out_channels,
            filter: FILTER_SIZE,
            stride: (1, 1),
            pad: Pad2::symmetric(2, 2),
            output_pad: (0, 0),
        });
        layers.push(LayerSpec::Sigmoid);
        Ok(layers)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminatorSpec {
    pub in_channels: usize,
    pub in_hw: (usize, usize),
    /// Filter counts; all but the last convolution use stride 2.
    pub filters: Vec<usize>,
    /// Spatial size the last convolution is padded/cropped to.
    pub final_hw: (usize, usize),
    pub lrelu_slope: f64,
    pub dropout_rate: f64,
}

impl DiscriminatorSpec {
    /// Reference architecture: 64/128/256 filters, batchnorm after the
    /// second and third convolutions, flattened to 256*5*5 = 6,400
    /// features (the 10x12 -> 5x6 chain is cropped to 5x5 by the last
    /// convolution's width padding).
    pub fn reference(in_channels: usize, lrelu_slope: f64, dropout_rate: f64) -> Self {
        Self {
            in_channels,
            in_hw: (20, 24),
            filters: vec![64, 128, 256],
            final_hw: (5, 5),
            lrelu_slope,
            dropout_rate,
        }
    }

    pub fn for_grid(
        in_channels: usize,
        in_hw: (usize, usize),
        filters: Vec<usize>,
        lrelu_slope: f64,
        dropout_rate: f64,
    ) -> Self {
        let h = in_hw.0.div_ceil(4);
        let w = in_hw.1.div_ceil(4);
        let side = h.min(w);
        Self {
            in_channels,
            in_hw,
            filters,
            final_hw: (side, side),
            lrelu_slope,
            dropout_rate,
        }
    }

    pub fn flat_features(&self) -> usize {
        self.filters.last().copied().unwrap_or(0) * self.final_hw.0 * self.final_hw.1
    }

    pub fn layers(&self) -> Result<Vec<LayerSpec>> {
        if self.filters.len() < 2 {
            return Err(Error::InvalidArgument(
                "discriminator needs at least two convolutions".into(),
            ));
        }
        let mut layers = Vec::new();
        let mut channels = self.in_channels;
        let mut chain = vec![self.in_hw];

        for (k, &filters) in self.filters.iter().enumerate() {
            let last = k + 1 == self.filters.len();
            let (h, w) = *chain.last().unwrap();
            if last {
                // stride 1, asymmetrically padded onto final_hw
                let (top, bottom) = solve_same(h, self.final_hw.0)
                    .ok_or_else(|| chain_error("discriminator", &chain, h, self.final_hw.0))?;
                let (left, right) = solve_same(w, self.final_hw.1)
                    .ok_or_else(|| chain_error("discriminator", &chain, w, self.final_hw.1))?;
                layers.push(LayerSpec::Conv {
                    in_channels: channels,
                    out_channels: filters,
                    filter: FILTER_SIZE,
                    stride: (1, 1),
                    pad: Pad2 {
                        top,
                        bottom,
                        left,
                        right,
                    },
                });
                chain.push(self.final_hw);
            } else {
                // stride 2, symmetric padding 2: d -> ceil(d/2)
                layers.push(LayerSpec::Conv {
                    in_channels: channels,
                    out_channels: filters,
                    filter: FILTER_SIZE,
                    stride: (2, 2),
                    pad: Pad2::symmetric(2, 2),
                });
                chain.push((h.div_ceil(2), w.div_ceil(2)));
            }
            if k >= 1 {
                layers.push(LayerSpec::BatchNorm {
                    features: filters,
                    momentum: 0.99,
                    eps: 1e-5,
                });
            }
            layers.push(LayerSpec::LeakyRelu {
                slope: self.lrelu_slope,
            });
            layers.push(LayerSpec::Dropout {
                rate: self.dropout_rate,
            });
            channels = filters;
        }

        layers.push(LayerSpec::Flatten);
        layers.push(LayerSpec::Dense {
            in_features: self.flat_features(),
            out_features: 1,
        });
        layers.push(LayerSpec::Sigmoid);
        Ok(layers)
    }
}

/// Padding and output padding for a stride-`s` size-5 deconvolution
/// mapping `d -> target`: `target = (d-1)s + 5 - 2p + op`.
fn solve_deconv(d: usize, target: usize, stride: usize) -> Option<(usize, usize)> {
    let full = (d - 1) * stride + FILTER_SIZE;
    for pad in 0..=FILTER_SIZE {
        for op in 0..stride {
            if full + op >= 2 * pad && full + op - 2 * pad == target {
                return Some((pad, op));
            }
        }
    }
    None
}

/// Asymmetric padding for a stride-1 size-5 convolution mapping
/// `d -> target`; the right/bottom side gets the smaller share
/// (crop-style).
fn solve_same(d: usize, target: usize) -> Option<(usize, usize)> {
    let total = (target + FILTER_SIZE).checked_sub(d + 1)?;
    if total > 2 * (FILTER_SIZE - 1) {
        return None;
    }
    let first = total.div_ceil(2);
    Some((first, total - first))
}

fn chain_error(name: &str, chain: &[(usize, usize)], from: usize, to: usize) -> Error {
    Error::Shape(format!(
        "{} shape chain cannot reach {} from {} (chain so far: {:?})",
        name, to, from, chain
    ))
}

/// Initialise generator parameters. The shape chain must close at
/// `out_channels x out_hw`, otherwise the per-layer chain is reported.
pub fn build_generator(spec: &GeneratorSpec, seed: u64) -> Result<NetworkParams> {
    let layers = spec.layers()?;
    let mut stream = RunRng::new(seed).stream("init-generator", &[]);
    let net = NetworkParams::build(layers, (spec.latent_dim, 1, 1), &mut stream)?;
    let out = net.output_shape()?;
    let want = (spec.out_channels, spec.out_hw.0, spec.out_hw.1);
    if out != want {
        return Err(Error::Shape(format!(
            "generator output {:?} does not close at {:?}; chain: {:?}",
            out,
            want,
            net.shape_chain()?
        )));
    }
    Ok(net)
}

/// Initialise discriminator parameters; output must be a scalar.
pub fn build_discriminator(spec: &DiscriminatorSpec, seed: u64) -> Result<NetworkParams> {
    let layers = spec.layers()?;
    let mut stream = RunRng::new(seed).stream("init-discriminator", &[]);
    let net = NetworkParams::build(
        layers,
        (spec.in_channels, spec.in_hw.0, spec.in_hw.1),
        &mut stream,
    )?;
    let out = net.output_shape()?;
    if out != (1, 1, 1) {
        return Err(Error::Shape(format!(
            "discriminator output {:?} is not scalar; chain: {:?}",
            out,
            net.shape_chain()?
        )));
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SLOPE: f64 = 0.2991161912395133;
    const RATE: f64 = 0.44053850596844424;

    #[test]
    fn reference_generator_chain_closes_at_3x20x24() {
        let spec = GeneratorSpec::reference(3, SLOPE, RATE);
        let net = build_generator(&spec, 7).unwrap();
        assert_eq!(net.output_shape().unwrap(), (3, 20, 24));
        let chain = net.shape_chain().unwrap();
        // dense -> reshape -> ... deconv1 ends 10x12, deconv2 ends 20x24
        assert!(chain.contains(&(512, 10, 12)), "chain: {:?}", chain);
        assert!(chain.contains(&(512, 20, 24)), "chain: {:?}", chain);
    }

    #[test]
    fn reference_dense_sublayer_parameter_count() {
        let spec = GeneratorSpec::reference(3, SLOPE, RATE);
        assert_eq!(spec.dense_units(), 25_600);
        let net = build_generator(&spec, 7).unwrap();
        // dense weights + bias
        assert_eq!(net.states()[0].trainable_len(), 100 * 25_600 + 25_600);
        assert_eq!(net.states()[0].trainable_len(), 2_585_600);
    }

    #[test]
    fn same_seed_gives_identical_parameters() {
        let spec = GeneratorSpec::for_grid(2, (8, 8), 32, vec![16, 16], SLOPE, RATE);
        let a = build_generator(&spec, 5).unwrap();
        let b = build_generator(&spec, 5).unwrap();
        assert_eq!(a.states(), b.states());
    }

    #[test]
    fn reference_discriminator_flattens_to_6400() {
        let spec = DiscriminatorSpec::reference(3, SLOPE, RATE);
        assert_eq!(spec.flat_features(), 6_400);
        let net = build_discriminator(&spec, 7).unwrap();
        assert_eq!(net.output_shape().unwrap(), (1, 1, 1));
        let chain = net.shape_chain().unwrap();
        assert!(chain.contains(&(64, 10, 12)), "chain: {:?}", chain);
        assert!(chain.contains(&(128, 5, 6)), "chain: {:?}", chain);
        assert!(chain.contains(&(256, 5, 5)), "chain: {:?}", chain);
    }

    #[test]
    fn reference_discriminator_non_trainable_count() {
        // running batchnorm statistics after layers 2 and 3
        let spec = DiscriminatorSpec::reference(3, SLOPE, RATE);
        let net = build_discriminator(&spec, 7).unwrap();
        assert_eq!(net.non_trainable_count(), 2 * (128 + 256));
        assert_eq!(net.non_trainable_count(), 768);
        assert_eq!(
            REFERENCE_DISCRIMINATOR_TOTAL - REFERENCE_DISCRIMINATOR_TRAINABLE,
            768
        );
    }

    #[test]
    fn toy_specs_close_on_8x8() {
        let g = GeneratorSpec::for_grid(3, (8, 8), 32, vec![16, 8], SLOPE, RATE);
        let net = build_generator(&g, 1).unwrap();
        assert_eq!(net.output_shape().unwrap(), (3, 8, 8));
        let d = DiscriminatorSpec::for_grid(3, (8, 8), vec![8, 16, 16], SLOPE, RATE);
        let dn = build_discriminator(&d, 1).unwrap();
        assert_eq!(dn.output_shape().unwrap(), (1, 1, 1));
    }

    #[test]
    fn solver_handles_the_width_stretch() {
        // 5 -> 12 under stride 2 needs pad 1 with output padding 1
        assert_eq!(solve_deconv(5, 12, 2), Some((1, 1)));
        assert_eq!(solve_deconv(5, 10, 2), Some((2, 1)));
        assert_eq!(solve_same(6, 5), Some((2, 1)));
        assert_eq!(solve_same(5, 5), Some((2, 2)));
        assert_eq!(solve_deconv(5, 40, 2), None);
    }

    #[test]
    fn unreachable_chain_reports_shapes() {
        let spec = GeneratorSpec {
            latent_dim: 10,
            base: (8, 2, 2),
            hidden_filters: vec![8],
            out_channels: 1,
            out_hw: (64, 64),
            lrelu_slope: SLOPE,
            dropout_rate: RATE,
        };
        let err = spec.layers().unwrap_err();
        assert!(err.to_string().contains("chain"), "{}", err);
    }
}
