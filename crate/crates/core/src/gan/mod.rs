//! DCGAN-style generator/discriminator pair, the adversarial losses, the
//! alternating training loop, sampling and checkpoints.
//!
//! Sign convention: the discriminator objective `E[log D(x)] + E[log(1 -
//! D(G(z)))]` is *maximized* by D, so the loss minimized here is its
//! negation, `L_D = -(mean log D(x) + mean log(1 - D(G(z))))`. Labels are
//! real = 1, fake = 0. Every log argument is clamped below at
//! [`LOG_CLAMP`].

mod checkpoint;
mod config;
mod loss;
mod model;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{GanConfig, LossVariant};
pub use loss::{
    d_loss, d_loss_value, discriminator_loss, g_loss, g_loss_value, generator_loss, LossOutput, LOG_CLAMP,
};
pub use model::{build, sample, GanModel, SAMPLE_CHUNK};
pub use train::{train, StepRecord, TrainingLog};
