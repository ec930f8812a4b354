//! Adam optimiser with bias correction.

use ndarray::ArrayD;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::layer::LayerState;
use super::network::NetworkParams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment accumulators, one pair per trainable array.
#[derive(Clone, Debug)]
pub struct AdamState {
    config: AdamConfig,
    step: u64,
    first: Vec<Vec<ArrayD<f64>>>,
    second: Vec<Vec<ArrayD<f64>>>,
}

impl AdamState {
    pub fn new(network: &NetworkParams, config: AdamConfig) -> Self {
        let zeros = |states: &[LayerState]| -> Vec<Vec<ArrayD<f64>>> {
            states
                .iter()
                .map(|s| s.trainable.iter().map(|a| ArrayD::zeros(a.raw_dim())).collect())
                .collect()
        };
        Self {
            config,
            step: 0,
            first: zeros(network.states()),
            second: zeros(network.states()),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> AdamConfig {
        self.config
    }

    /// One update over every trainable array. `grads[i][j]` must match
    /// `states[i].trainable[j]` in shape.
    pub fn step(&mut self, states: &mut [LayerState], grads: &[Vec<ArrayD<f64>>]) -> Result<()> {
        if states.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(Error::Shape(format!(
                "adam: {} layers of gradients for {} layers of state",
                grads.len(),
                self.first.len()
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);

        for (layer, (state, layer_grads)) in states.iter_mut().zip(grads).enumerate() {
            if state.trainable.len() != layer_grads.len() {
                return Err(Error::Shape(format!(
                    "adam: layer {} has {} gradient arrays for {} parameter arrays",
                    layer,
                    layer_grads.len(),
                    state.trainable.len()
                )));
            }
            for (j, grad) in layer_grads.iter().enumerate() {
                let param = &mut state.trainable[j];
                if grad.raw_dim() != param.raw_dim() {
                    return Err(Error::Shape(format!(
                        "adam: layer {} array {}: gradient {:?} vs parameter {:?}",
                        layer,
                        j,
                        grad.shape(),
                        param.shape()
                    )));
                }
                let m = &mut self.first[layer][j];
                let v = &mut self.second[layer][j];
                ndarray::Zip::from(param)
                    .and(m)
                    .and(v)
                    .and(grad)
                    .for_each(|p, m, v, &g| {
                        *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                        *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                        let m_hat = *m / bc1;
                        let v_hat = *v / bc2;
                        *p -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
                    });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layer::LayerSpec;
    use crate::rng::RunRng;
    use ndarray::IxDyn;

    fn scalar_net() -> NetworkParams {
        let mut stream = RunRng::new(3).stream("adam-test", &[]);
        NetworkParams::build(
            vec![LayerSpec::Dense {
                in_features: 1,
                out_features: 1,
            }],
            (1, 1, 1),
            &mut stream,
        )
        .unwrap()
    }

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let mut net = scalar_net();
        let before = net.states()[0].trainable.clone();
        let mut adam = AdamState::new(&net, AdamConfig::default());
        let grads = vec![vec![
            ArrayD::zeros(IxDyn(&[1, 1])),
            ArrayD::zeros(IxDyn(&[1])),
        ]];
        for _ in 0..10 {
            adam.step(net.states_mut(), &grads).unwrap();
        }
        assert_eq!(net.states()[0].trainable, before);
    }

    #[test]
    fn constant_gradient_matches_hand_recursion() {
        // single scalar parameter, constant gradient: compare against an
        // independently coded Adam recursion
        let g = 0.37;
        let cfg = AdamConfig {
            learning_rate: 0.01,
            beta1: 0.22693882275467836,
            beta2: 0.999,
            epsilon: 1e-8,
        };
        let mut net = scalar_net();
        net.states_mut()[0].trainable[0].fill(1.0);
        net.states_mut()[0].trainable[1].fill(0.0);
        let mut adam = AdamState::new(&net, cfg);
        let grads = vec![vec![
            ArrayD::from_elem(IxDyn(&[1, 1]), g),
            ArrayD::zeros(IxDyn(&[1])),
        ]];

        let (mut m, mut v, mut theta) = (0.0f64, 0.0f64, 1.0f64);
        for t in 1..=5 {
            adam.step(net.states_mut(), &grads).unwrap();
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
            let m_hat = m / (1.0 - cfg.beta1.powi(t));
            let v_hat = v / (1.0 - cfg.beta2.powi(t));
            theta -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
            let got = net.states()[0].trainable[0][[0, 0]];
            assert!((got - theta).abs() < 1e-15, "step {}: {} vs {}", t, got, theta);
        }
        // first update is close to a full signed step of the learning rate
        let expected_first = cfg.learning_rate * g / (g + cfg.epsilon);
        assert!((1.0 - expected_first - (1.0 - 0.01)).abs() < 1e-9);
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let mut net = scalar_net();
        let mut adam = AdamState::new(&net, AdamConfig::default());
        let grads = vec![vec![
            ArrayD::zeros(IxDyn(&[2, 1])),
            ArrayD::zeros(IxDyn(&[1])),
        ]];
        assert!(adam.step(net.states_mut(), &grads).is_err());
    }
}
