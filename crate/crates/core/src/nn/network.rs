//! Fixed layer-sequence networks.

use ndarray::ArrayD;

use crate::error::{Error, Result};
use crate::rng::Stream;

use super::layer::{backward, forward, init_state, LayerCache, LayerSpec, LayerState, Mode};
use super::tensor::Tensor4;

/// All trainable and non-trainable arrays of one network, with the
/// layer layout they belong to.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    specs: Vec<LayerSpec>,
    states: Vec<LayerState>,
    input_shape: (usize, usize, usize),
}

impl NetworkParams {
    /// Validate the shape chain and initialise parameters.
    pub fn build(
        specs: Vec<LayerSpec>,
        input_shape: (usize, usize, usize),
        stream: &mut Stream,
    ) -> Result<Self> {
        for spec in &specs {
            spec.validate()?;
        }
        // walk the chain once so errors name the offending layer
        let mut shape = input_shape;
        for (i, spec) in specs.iter().enumerate() {
            shape = spec.output_shape(shape).map_err(|e| {
                Error::Shape(format!("layer {} ({}): {}", i, spec.kind(), e))
            })?;
        }
        let states = specs.iter().map(|s| init_state(s, stream)).collect();
        Ok(Self {
            specs,
            states,
            input_shape,
        })
    }

    pub(super) fn from_parts(
        specs: Vec<LayerSpec>,
        states: Vec<LayerState>,
        input_shape: (usize, usize, usize),
    ) -> Self {
        Self {
            specs,
            states,
            input_shape,
        }
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn states(&self) -> &[LayerState] {
        &self.states
    }

    pub fn states_mut(&mut self) -> &mut [LayerState] {
        &mut self.states
    }

    pub fn input_shape(&self) -> (usize, usize, usize) {
        self.input_shape
    }

    /// `(c, h, w)` after every layer, starting from the input shape.
    pub fn shape_chain(&self) -> Result<Vec<(usize, usize, usize)>> {
        let mut chain = vec![self.input_shape];
        for spec in &self.specs {
            let next = spec.output_shape(*chain.last().unwrap())?;
            chain.push(next);
        }
        Ok(chain)
    }

    pub fn output_shape(&self) -> Result<(usize, usize, usize)> {
        Ok(*self.shape_chain()?.last().unwrap())
    }

    pub fn trainable_count(&self) -> usize {
        self.states.iter().map(|s| s.trainable_len()).sum()
    }

    pub fn non_trainable_count(&self) -> usize {
        self.states.iter().map(|s| s.running_len()).sum()
    }

    /// Training-mode forward pass. Batchnorm running statistics update,
    /// dropout draws masks from `stream`.
    pub fn forward_train(
        &mut self,
        input: &Tensor4,
        stream: &mut Stream,
    ) -> Result<(Tensor4, Vec<LayerCache>)> {
        self.forward_inner(input, Mode::Train, stream)
    }

    /// Deterministic inference pass: running statistics, no dropout.
    pub fn forward_eval(&self, input: &Tensor4) -> Result<Tensor4> {
        // eval touches neither dropout rng nor running stats
        let mut scratch = self.clone();
        let mut stream = crate::rng::RunRng::new(0).stream("eval-unused", &[]);
        let (out, _) = scratch.forward_inner(input, Mode::Eval, &mut stream)?;
        Ok(out)
    }

    /// Eval-mode forward that also returns caches (for gradient checks).
    pub fn forward_eval_with_caches(&self, input: &Tensor4) -> Result<(Tensor4, Vec<LayerCache>)> {
        let mut scratch = self.clone();
        let mut stream = crate::rng::RunRng::new(0).stream("eval-unused", &[]);
        scratch.forward_inner(input, Mode::Eval, &mut stream)
    }

    fn forward_inner(
        &mut self,
        input: &Tensor4,
        mode: Mode,
        stream: &mut Stream,
    ) -> Result<(Tensor4, Vec<LayerCache>)> {
        input.check_finite("network input")?;
        let mut caches = Vec::with_capacity(self.specs.len());
        let mut current = input.clone();
        for (spec, state) in self.specs.iter().zip(self.states.iter_mut()) {
            let (next, cache) = forward(spec, state, &current, mode, stream)?;
            caches.push(cache);
            current = next;
        }
        Ok((current, caches))
    }

    /// Backpropagate `upstream` through the cached forward pass.
    /// Returns the input gradient and per-layer parameter gradients
    /// aligned with `states()[i].trainable`.
    pub fn backward(
        &self,
        caches: &[LayerCache],
        upstream: &Tensor4,
    ) -> Result<(Tensor4, Vec<Vec<ArrayD<f64>>>)> {
        if caches.len() != self.specs.len() {
            return Err(Error::InvalidArgument(format!(
                "{} caches for {} layers",
                caches.len(),
                self.specs.len()
            )));
        }
        let mut grads: Vec<Vec<ArrayD<f64>>> = vec![Vec::new(); self.specs.len()];
        let mut current = upstream.clone();
        for i in (0..self.specs.len()).rev() {
            let (d_input, d_params) = backward(&self.specs[i], &self.states[i], &caches[i], &current)?;
            grads[i] = d_params;
            current = d_input;
        }
        Ok((current, grads))
    }

    /// Per-layer parameter table with totals.
    pub fn audit(&self, name: &str) -> Result<NetworkAudit> {
        let chain = self.shape_chain()?;
        let rows = self
            .specs
            .iter()
            .zip(self.states.iter())
            .zip(chain.iter().skip(1))
            .enumerate()
            .map(|(i, ((spec, state), &shape))| AuditRow {
                index: i,
                kind: spec.kind().to_string(),
                output_shape: shape,
                trainable: state.trainable_len(),
                non_trainable: state.running_len(),
            })
            .collect();
        Ok(NetworkAudit {
            name: name.to_string(),
            input_shape: self.input_shape,
            rows,
            trainable: self.trainable_count(),
            non_trainable: self.non_trainable_count(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct AuditRow {
    pub index: usize,
    pub kind: String,
    pub output_shape: (usize, usize, usize),
    pub trainable: usize,
    pub non_trainable: usize,
}

#[derive(Clone, Debug)]
pub struct NetworkAudit {
    pub name: String,
    pub input_shape: (usize, usize, usize),
    pub rows: Vec<AuditRow>,
    pub trainable: usize,
    pub non_trainable: usize,
}

impl std::fmt::Display for NetworkAudit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{} (input {}x{}x{})",
            self.name, self.input_shape.0, self.input_shape.1, self.input_shape.2
        )?;
        writeln!(
            f,
            "{:>3}  {:<10} {:>14} {:>12} {:>14}",
            "#", "layer", "output", "trainable", "non-trainable"
        )?;
        for row in &self.rows {
            writeln!(
                f,
                "{:>3}  {:<10} {:>14} {:>12} {:>14}",
                row.index,
                row.kind,
                format!(
                    "{}x{}x{}",
                    row.output_shape.0, row.output_shape.1, row.output_shape.2
                ),
                row.trainable,
                row.non_trainable
            )?;
        }
        writeln!(
            f,
            "total: {} trainable, {} non-trainable, {} overall",
            self.trainable,
            self.non_trainable,
            self.trainable + self.non_trainable
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layer::Pad2;
    use crate::rng::RunRng;

    fn stream() -> Stream {
        RunRng::new(1).stream("net-test", &[])
    }

    #[test]
    fn build_validates_shape_chain() {
        let specs = vec![
            LayerSpec::Dense {
                in_features: 4,
                out_features: 8,
            },
            LayerSpec::Reshape {
                channels: 2,
                height: 2,
                width: 2,
            },
            LayerSpec::Sigmoid,
        ];
        let net = NetworkParams::build(specs, (4, 1, 1), &mut stream()).unwrap();
        assert_eq!(net.output_shape().unwrap(), (2, 2, 2));
        assert_eq!(net.trainable_count(), 4 * 8 + 8);
    }

    #[test]
    fn build_rejects_broken_chain() {
        let specs = vec![LayerSpec::Reshape {
            channels: 3,
            height: 2,
            width: 2,
        }];
        let err = NetworkParams::build(specs, (4, 1, 1), &mut stream()).unwrap_err();
        assert!(err.to_string().contains("reshape"), "{}", err);
    }

    #[test]
    fn conv_size_formula() {
        // 20x24 input, filter 5, stride 2, symmetric padding 2 -> 10x12
        let specs = vec![LayerSpec::Conv {
            in_channels: 3,
            out_channels: 8,
            filter: 5,
            stride: (2, 2),
            pad: Pad2::symmetric(2, 2),
        }];
        let net = NetworkParams::build(specs, (3, 20, 24), &mut stream()).unwrap();
        assert_eq!(net.output_shape().unwrap(), (8, 10, 12));
    }

    #[test]
    fn same_seed_same_init() {
        let specs = vec![LayerSpec::Dense {
            in_features: 6,
            out_features: 3,
        }];
        let a = NetworkParams::build(specs.clone(), (6, 1, 1), &mut stream()).unwrap();
        let b = NetworkParams::build(specs, (6, 1, 1), &mut stream()).unwrap();
        assert_eq!(a.states()[0].trainable[0], b.states()[0].trainable[0]);
    }

    #[test]
    fn eval_forward_is_deterministic_and_pure() {
        let specs = vec![
            LayerSpec::Conv {
                in_channels: 1,
                out_channels: 4,
                filter: 3,
                stride: (1, 1),
                pad: Pad2::symmetric(1, 1),
            },
            LayerSpec::BatchNorm {
                features: 4,
                momentum: 0.99,
                eps: 1e-5,
            },
            LayerSpec::Dropout { rate: 0.5 },
            LayerSpec::Sigmoid,
        ];
        let net = NetworkParams::build(specs, (1, 4, 4), &mut stream()).unwrap();
        let mut s = RunRng::new(9).stream("input", &[]);
        let input = Tensor4::new(ndarray::Array4::from_shape_fn((2, 1, 4, 4), |_| {
            s.standard_normal()
        }))
        .unwrap();
        let a = net.forward_eval(&input).unwrap();
        let b = net.forward_eval(&input).unwrap();
        assert_eq!(a.data(), b.data());
    }
}
