use super::{GanModel, LossVariant};
use crate::error::{Error, Result};
use crate::nn::Mode;
use crate::{Sequential, Tensor};

pub const LOG_CLAMP: f64 = 1e-12;

fn clamped_ln(p: f64) -> f64 {
    p.max(LOG_CLAMP).ln()
}

// Derivative of `clamped_ln`; zero where the clamp is active.
fn clamped_ln_grad(p: f64) -> f64 {
    if p > LOG_CLAMP {
        1.0 / p
    } else {
        0.0
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Discriminator loss from its outputs on a real and a fake batch.
pub fn d_loss_value(d_real: &[f64], d_fake: &[f64]) -> f64 {
    let real: Vec<f64> = d_real.iter().map(|&p| clamped_ln(p)).collect();
    let fake: Vec<f64> = d_fake.iter().map(|&p| clamped_ln(1.0 - p)).collect();
    -(mean(&real) + mean(&fake))
}

/// Generator loss from the discriminator's outputs on a fake batch.
pub fn g_loss_value(d_fake: &[f64], variant: LossVariant) -> f64 {
    match variant {
        LossVariant::PaperSaturating => mean(&d_fake.iter().map(|&p| clamped_ln(1.0 - p)).collect::<Vec<_>>()),
        LossVariant::NonSaturating => -mean(&d_fake.iter().map(|&p| clamped_ln(p)).collect::<Vec<_>>()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    /// Mean D output on the real batch (NaN for the generator loss).
    pub d_real: f64,
    /// Mean D output on the fake batch.
    pub d_fake: f64,
}

fn check_batch(op: &str, t: &Tensor) -> Result<()> {
    if t.shape().is_empty() || t.batch() == 0 {
        return Err(Error::shape(op, &[1], t.shape()));
    }
    Ok(())
}

fn grad_tensor(shape: &[usize], values: Vec<f64>) -> Result<Tensor> {
    Tensor::from_vec(shape.to_vec(), values)
}

/// Discriminator loss on `real` and `fake`; accumulates gradients into the
/// parameters of `d` only.
pub fn discriminator_loss(d: &mut Sequential, real: &Tensor, fake: &Tensor) -> Result<LossOutput> {
    check_batch("discriminator_loss real", real)?;
    check_batch("discriminator_loss fake", fake)?;
    if real.shape()[1..] != fake.shape()[1..] {
        return Err(Error::shape("discriminator_loss", real.shape(), fake.shape()));
    }
    let p_real = d.forward(real, Mode::Train)?;
    let n = p_real.len() as f64;
    let g = p_real.data().iter().map(|&p| -clamped_ln_grad(p) / n).collect();
    d.backward(&grad_tensor(p_real.shape(), g)?, true)?;

    let p_fake = d.forward(fake, Mode::Train)?;
    let n = p_fake.len() as f64;
    let g = p_fake.data().iter().map(|&p| clamped_ln_grad(1.0 - p) / n).collect();
    d.backward(&grad_tensor(p_fake.shape(), g)?, true)?;

    Ok(LossOutput {
        loss: d_loss_value(p_real.data(), p_fake.data()),
        d_real: mean(p_real.data()),
        d_fake: mean(p_fake.data()),
    })
}

/// Generator loss for latent batch `z`; gradients flow through `d` without
/// touching its parameters and accumulate into the parameters of `g`.
pub fn generator_loss(g: &mut Sequential, d: &mut Sequential, z: &Tensor, variant: LossVariant) -> Result<LossOutput> {
    check_batch("generator_loss", z)?;
    let fake = g.forward(z, Mode::Train)?;
    let p = d.forward(&fake, Mode::Train)?;
    let n = p.len() as f64;
    let grad = p
        .data()
        .iter()
        .map(|&p| match variant {
            LossVariant::PaperSaturating => -clamped_ln_grad(1.0 - p) / n,
            LossVariant::NonSaturating => -clamped_ln_grad(p) / n,
        })
        .collect();
    let dx = d.backward(&grad_tensor(p.shape(), grad)?, false)?;
    g.backward(&dx, true)?;
    Ok(LossOutput {
        loss: g_loss_value(p.data(), variant),
        d_real: f64::NAN,
        d_fake: mean(p.data()),
    })
}

fn check_z(model: &GanModel, z: &Tensor) -> Result<()> {
    let want = [z.shape().first().copied().unwrap_or(0).max(1), model.config.z_dim];
    if z.shape().len() != 2 || z.shape()[1] != model.config.z_dim || z.batch() == 0 {
        return Err(Error::shape("latent batch", &want, z.shape()));
    }
    Ok(())
}

/// Discriminator loss with `G(z)` as the fake batch; G is held constant.
pub fn d_loss(model: &mut GanModel, real: &Tensor, z: &Tensor) -> Result<LossOutput> {
    check_z(model, z)?;
    let w = model.config.output_width;
    if real.shape().len() != 4 || real.shape()[1..] != [1, w, w] {
        return Err(Error::shape("real batch", &[real.shape().first().copied().unwrap_or(1), 1, w, w], real.shape()));
    }
    let fake = model.generator.forward(z, Mode::Train)?;
    discriminator_loss(&mut model.discriminator, real, &fake)
}

/// Generator loss per the configured variant; D is held constant.
pub fn g_loss(model: &mut GanModel, z: &Tensor) -> Result<LossOutput> {
    check_z(model, z)?;
    let variant = model.config.loss_variant;
    generator_loss(&mut model.generator, &mut model.discriminator, z, variant)
}
