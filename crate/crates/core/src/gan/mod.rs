//! Deep-convolutional GAN: architectures, losses, training, sampling.

mod config;
mod loss;
mod spec;
mod train;

pub use config::TrainConfig;
pub use loss::{d_loss_grads, g_loss_grads, gan_losses, GanLosses, EPS};
pub use spec::{
    build_discriminator, build_generator, DiscriminatorSpec, GeneratorSpec,
    FILTER_SIZE, REFERENCE_DISCRIMINATOR_TOTAL, REFERENCE_DISCRIMINATOR_TRAINABLE,
    REFERENCE_GENERATOR_TRAINABLE,
};
pub use train::{sample_events, train, EpochLoss, TrainResult, CHECKPOINT_INTERVAL};
