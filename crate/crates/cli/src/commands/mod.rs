pub mod diagnose;
pub mod fit;
pub mod generate;
pub mod sweep;
pub mod synth;
pub mod train;

use hazardgen_core::gan::{DiscriminatorSpec, GeneratorSpec, TrainConfig};

/// Architecture for the grid at hand: the reference networks on the
/// 20x24 grid they were designed for, scaled-down defaults elsewhere.
pub fn specs_for(
    channels: usize,
    height: usize,
    width: usize,
    cfg: &TrainConfig,
) -> (GeneratorSpec, DiscriminatorSpec) {
    if (height, width) == (20, 24) {
        (
            GeneratorSpec::reference(channels, cfg.lrelu, cfg.dropout),
            DiscriminatorSpec::reference(channels, cfg.lrelu, cfg.dropout),
        )
    } else {
        (
            GeneratorSpec::for_grid(
                channels,
                (height, width),
                128,
                vec![64, 64],
                cfg.lrelu,
                cfg.dropout,
            ),
            DiscriminatorSpec::for_grid(
                channels,
                (height, width),
                vec![32, 64, 128],
                cfg.lrelu,
                cfg.dropout,
            ),
        )
    }
}
