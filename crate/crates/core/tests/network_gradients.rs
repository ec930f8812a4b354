//! Finite-difference verification of the full architectures at reduced
//! width (the parameter budget keeps central differences tractable).

use hazardgen_core::gan::{DiscriminatorSpec, GeneratorSpec};
use hazardgen_core::nn::gradient_check;

const SLOPE: f64 = 0.2991161912395133;
const RATE: f64 = 0.44053850596844424;

#[test]
fn reduced_width_generator_passes_gradient_check() {
    let spec = GeneratorSpec {
        latent_dim: 8,
        base: (16, 2, 2),
        hidden_filters: vec![8, 8],
        out_channels: 2,
        out_hw: (8, 8),
        lrelu_slope: SLOPE,
        dropout_rate: RATE,
    };
    let layers = spec.layers().unwrap();
    let report = gradient_check(&layers, (2, 8, 1, 1), 42).unwrap();
    assert!(report.passed, "generator gradients:\n{}", report);
}

#[test]
fn reduced_width_discriminator_passes_gradient_check() {
    let spec = DiscriminatorSpec::for_grid(2, (8, 8), vec![8, 8, 8], SLOPE, RATE);
    let layers = spec.layers().unwrap();
    let report = gradient_check(&layers, (2, 2, 8, 8), 43).unwrap();
    assert!(report.passed, "discriminator gradients:\n{}", report);
}
