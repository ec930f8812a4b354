//! Minimal differentiable-layer engine.
//!
//! Fixed layer sequences (no general graphs), double precision
//! throughout, exact analytic backward passes verified by central
//! finite differences. Parallelism only ever splits work across
//! disjoint slices, so results are bit-identical for any thread count.

mod adam;
mod checkpoint;
mod conv;
mod gradcheck;
mod layer;
mod network;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{load_network, save_network};
pub use gradcheck::{
    gradient_check, max_relative_error, relative_error, GradCheckReport, LayerCheck, FD_STEP,
    FD_TOLERANCE, MAX_CHECK_PARAMS,
};
pub use layer::{backward, forward, init_state, LayerCache, LayerSpec, LayerState, Mode, Pad2};
pub use network::{AuditRow, NetworkAudit, NetworkParams};
pub use tensor::Tensor4;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RunRng;
    use approx::assert_abs_diff_eq;
    use ndarray::{Array4, ArrayD, IxDyn};

    fn stream(label: &str) -> crate::rng::Stream {
        RunRng::new(77).stream(label, &[])
    }

    fn random_input(b: usize, c: usize, h: usize, w: usize, label: &str) -> Tensor4 {
        let mut s = stream(label);
        Tensor4::new(Array4::from_shape_fn((b, c, h, w), |_| s.standard_normal())).unwrap()
    }

    #[test]
    fn lrelu_applies_tuned_slope_to_negatives() {
        let slope = 0.2991161912395133;
        let spec = LayerSpec::LeakyRelu { slope };
        let mut state = LayerState::empty();
        let input = Tensor4::new(Array4::from_elem((1, 1, 1, 1), -1.0)).unwrap();
        let (out, _) = forward(&spec, &mut state, &input, Mode::Eval, &mut stream("x")).unwrap();
        assert_abs_diff_eq!(out.data()[[0, 0, 0, 0]], -slope, epsilon = 1e-16);
    }

    #[test]
    fn sigmoid_of_zero_is_half() {
        let spec = LayerSpec::Sigmoid;
        let mut state = LayerState::empty();
        let input = Tensor4::zeros(1, 2, 2, 2);
        let (out, _) = forward(&spec, &mut state, &input, Mode::Eval, &mut stream("x")).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn batchnorm_train_output_is_standardised() {
        let spec = LayerSpec::BatchNorm {
            features: 3,
            momentum: 0.99,
            eps: 1e-12,
        };
        let mut state = init_state(&spec, &mut stream("bn"));
        let input = random_input(8, 3, 5, 5, "bn-in");
        let (out, _) = forward(&spec, &mut state, &input, Mode::Train, &mut stream("x")).unwrap();
        for c in 0..3 {
            let plane = out.data().index_axis(ndarray::Axis(1), c);
            let m = plane.mean().unwrap();
            let v = plane.mapv(|x| (x - m) * (x - m)).mean().unwrap();
            assert!(m.abs() < 1e-6, "channel {} mean {}", c, m);
            assert!((v - 1.0).abs() < 1e-6, "channel {} var {}", c, v);
        }
    }

    #[test]
    fn dropout_preserves_expectation() {
        let rate = 0.44053850596844424;
        let spec = LayerSpec::Dropout { rate };
        let mut state = LayerState::empty();
        let input = Tensor4::new(Array4::from_elem((1, 1, 10, 10), 1.0)).unwrap();
        let trials = 3000;
        let mut acc = 0.0;
        for t in 0..trials {
            let mut s = RunRng::new(50).stream("drop", &[t]);
            let (out, _) = forward(&spec, &mut state, &input, Mode::Train, &mut s).unwrap();
            acc += out.data().mean().unwrap();
        }
        let mean = acc / trials as f64;
        // inverted scaling: E[out] = in; Monte-Carlo tolerance
        assert!((mean - 1.0).abs() < 0.01, "mean {}", mean);
    }

    #[test]
    fn dropout_inactive_in_eval() {
        let spec = LayerSpec::Dropout { rate: 0.9 };
        let mut state = LayerState::empty();
        let input = random_input(2, 3, 4, 4, "d-eval");
        let (out, _) = forward(&spec, &mut state, &input, Mode::Eval, &mut stream("x")).unwrap();
        assert_eq!(out.data(), input.data());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let specs = [
            LayerSpec::Dense {
                in_features: 4,
                out_features: 3,
            },
            LayerSpec::Conv {
                in_channels: 2,
                out_channels: 2,
                filter: 3,
                stride: (1, 1),
                pad: Pad2::symmetric(1, 1),
            },
        ];
        for spec in specs {
            let mut state = init_state(&spec, &mut stream("zero"));
            let input = match spec {
                LayerSpec::Dense { .. } => random_input(2, 4, 1, 1, "zin"),
                _ => random_input(2, 2, 3, 3, "zin2"),
            };
            let (out, cache) =
                forward(&spec, &mut state, &input, Mode::Train, &mut stream("x")).unwrap();
            let upstream = Tensor4::zeros(out.dim().0, out.dim().1, out.dim().2, out.dim().3);
            let (d_in, d_params) = backward(&spec, &state, &cache, &upstream).unwrap();
            assert!(d_in.data().iter().all(|&v| v == 0.0));
            for g in d_params {
                assert!(g.iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn dense_identity_weights_hand_gradient() {
        // y = x W + b with W = I (2x2), b = 0; L = sum(y * u)
        // dW = x^T u, db = sum_b u, dx = u W^T = u
        let spec = LayerSpec::Dense {
            in_features: 2,
            out_features: 2,
        };
        let mut state = init_state(&spec, &mut stream("id"));
        state.trainable[0] = ArrayD::from_shape_vec(IxDyn(&[2, 2]), vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        state.trainable[1] = ArrayD::zeros(IxDyn(&[2]));
        let input = Tensor4::from_flat(
            ndarray::Array2::from_shape_vec((1, 2), vec![3.0, -2.0]).unwrap(),
        )
        .unwrap();
        let (_, cache) = forward(&spec, &mut state, &input, Mode::Train, &mut stream("x")).unwrap();
        let upstream =
            Tensor4::from_flat(ndarray::Array2::from_shape_vec((1, 2), vec![0.5, 1.5]).unwrap())
                .unwrap();
        let (d_in, d_params) = backward(&spec, &state, &cache, &upstream).unwrap();
        assert_eq!(d_in.flat().unwrap().as_slice().unwrap(), [0.5, 1.5]);
        assert_eq!(
            d_params[0].as_slice().unwrap(),
            [3.0 * 0.5, 3.0 * 1.5, -2.0 * 0.5, -2.0 * 1.5]
        );
        assert_eq!(d_params[1].as_slice().unwrap(), [0.5, 1.5]);
    }

    #[test]
    fn every_layer_type_passes_finite_difference_check() {
        let cases: Vec<(Vec<LayerSpec>, (usize, usize, usize, usize))> = vec![
            (
                vec![LayerSpec::Dense {
                    in_features: 6,
                    out_features: 4,
                }],
                (3, 6, 1, 1),
            ),
            (
                vec![LayerSpec::Conv {
                    in_channels: 2,
                    out_channels: 3,
                    filter: 3,
                    stride: (2, 2),
                    pad: Pad2 {
                        top: 1,
                        bottom: 0,
                        left: 1,
                        right: 1,
                    },
                }],
                (2, 2, 5, 6),
            ),
            (
                vec![LayerSpec::Deconv {
                    in_channels: 2,
                    out_channels: 3,
                    filter: 3,
                    stride: (2, 2),
                    pad: Pad2 {
                        top: 1,
                        bottom: 1,
                        left: 0,
                        right: 1,
                    },
                    output_pad: (1, 0),
                }],
                (2, 2, 3, 3),
            ),
            (
                vec![LayerSpec::BatchNorm {
                    features: 3,
                    momentum: 0.99,
                    eps: 1e-5,
                }],
                (4, 3, 3, 3),
            ),
            (vec![LayerSpec::Dropout { rate: 0.35 }], (2, 2, 4, 4)),
            (vec![LayerSpec::LeakyRelu { slope: 0.3 }], (2, 2, 4, 4)),
            (vec![LayerSpec::Sigmoid], (2, 2, 4, 4)),
            (
                vec![
                    LayerSpec::Flatten,
                    LayerSpec::Dense {
                        in_features: 18,
                        out_features: 4,
                    },
                    LayerSpec::Reshape {
                        channels: 4,
                        height: 1,
                        width: 1,
                    },
                ],
                (2, 2, 3, 3),
            ),
        ];
        for (specs, shape) in cases {
            let report = gradient_check(&specs, shape, 1234).unwrap();
            assert!(
                report.passed,
                "{} failed:\n{}",
                specs[0].kind(),
                report
            );
        }
    }

    #[test]
    fn corrupted_backward_fails_the_check() {
        // a sign flip in the analytic gradient must trip the comparison
        let analytic = ArrayD::from_shape_vec(IxDyn(&[4]), vec![0.5, -1.0, 2.0, 0.25]).unwrap();
        let mut corrupted = analytic.clone();
        corrupted[[1]] = -corrupted[[1]];
        assert!(max_relative_error(&analytic, &analytic) < FD_TOLERANCE);
        assert!(max_relative_error(&corrupted, &analytic) > FD_TOLERANCE);
    }

    #[test]
    fn mismatched_cache_is_rejected() {
        let dense = LayerSpec::Dense {
            in_features: 2,
            out_features: 2,
        };
        let sig = LayerSpec::Sigmoid;
        let mut dstate = init_state(&dense, &mut stream("mc"));
        let mut sstate = LayerState::empty();
        let input = random_input(1, 2, 1, 1, "mc-in");
        let (_, sig_cache) =
            forward(&sig, &mut sstate, &input, Mode::Eval, &mut stream("x")).unwrap();
        let upstream = random_input(1, 2, 1, 1, "mc-up");
        assert!(backward(&dense, &dstate, &sig_cache, &upstream).is_err());
        let _ = &mut dstate;
    }

    #[test]
    fn oversized_networks_rejected_by_gradcheck() {
        let specs = vec![LayerSpec::Dense {
            in_features: 200,
            out_features: 200,
        }];
        assert!(gradient_check(&specs, (1, 200, 1, 1), 1).is_err());
    }
}
