use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde_json::json;

use super::GanConfig;
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::nn::{AdamState, HasParams, LayerSpec, Sequential};
use crate::raster::maps_from_symmetric_batch;
use crate::seed;
use crate::Tensor;

/// Latent vectors per sampling work unit. Fixed so that results do not
/// depend on the number of worker threads.
pub const SAMPLE_CHUNK: usize = 64;

#[derive(Debug, Clone)]
pub struct GanModel {
    pub config: GanConfig,
    pub generator: Sequential<f64>,
    pub discriminator: Sequential<f64>,
    pub opt_g: AdamState<f64>,
    pub opt_d: AdamState<f64>,
    /// Completed generator updates.
    pub step: u64,
}

fn generator_specs(c: &GanConfig) -> Vec<LayerSpec> {
    let ch = c.channels();
    let mut specs = vec![
        LayerSpec::linear(c.z_dim, ch[0] * 16).without_bias().with_out_shape(vec![ch[0], 4, 4]),
        LayerSpec::batchnorm(ch[0]),
        LayerSpec::Relu,
    ];
    for pair in ch.windows(2) {
        specs.push(LayerSpec::transposed_conv(pair[0], pair[1]).without_bias());
        specs.push(LayerSpec::batchnorm(pair[1]));
        specs.push(LayerSpec::Relu);
    }
    specs.push(LayerSpec::transposed_conv(*ch.last().expect("n_blocks >= 1"), 1));
    specs.push(LayerSpec::Tanh);
    specs
}

fn discriminator_specs(c: &GanConfig) -> Vec<LayerSpec> {
    let ch: Vec<usize> = c.channels().into_iter().rev().collect();
    let mut specs = vec![LayerSpec::conv(1, ch[0]), LayerSpec::leaky_relu()];
    for pair in ch.windows(2) {
        specs.push(LayerSpec::conv(pair[0], pair[1]).without_bias());
        specs.push(LayerSpec::batchnorm(pair[1]));
        specs.push(LayerSpec::leaky_relu());
    }
    specs.push(LayerSpec::linear(ch.last().expect("n_blocks >= 1") * 16, 1));
    specs.push(LayerSpec::Sigmoid);
    specs
}

/// Fresh model with `N(0, init_std)` weights, zero biases and unit batch
/// norm scales, fully determined by `config.seed`.
pub fn build(config: &GanConfig) -> Result<GanModel> {
    config.validate()?;
    let mut generator = Sequential::new(
        &generator_specs(config),
        config.init_std,
        &mut seed::rng(config.seed, "init-generator", 0),
    )?;
    let mut discriminator = Sequential::new(
        &discriminator_specs(config),
        config.init_std,
        &mut seed::rng(config.seed, "init-discriminator", 0),
    )?;
    let opt_g = AdamState::new(config.adam_g, &generator.params_mut());
    let opt_d = AdamState::new(config.adam_d, &discriminator.params_mut());
    Ok(GanModel {
        config: config.clone(),
        generator,
        discriminator,
        opt_g,
        opt_d,
        step: 0,
    })
}

impl GanModel {
    /// `n` standard-normal latent vectors.
    pub fn latent<R: rand::Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Tensor {
        let data = (0..n * self.config.z_dim).map(|_| StandardNormal.sample(rng)).collect();
        Tensor::from_vec(vec![n, self.config.z_dim], data).expect("latent shape")
    }

    /// Eval-mode generator output in [-1, 1], shape `(n, 1, W, W)`.
    pub fn generate(&self, z: &Tensor) -> Result<Tensor> {
        self.generator.infer(z)
    }

    /// Eval-mode discriminator probabilities, one per sample.
    pub fn discriminate(&self, x: &Tensor) -> Result<Vec<f64>> {
        Ok(self.discriminator.infer(x)?.into_data())
    }
}

/// `n` synthetic maps from latent vectors drawn per chunk from `seed`.
pub fn sample(model: &GanModel, n: usize, seed: u64) -> Result<Corpus> {
    if n == 0 {
        return Err(Error::argument("cannot sample zero maps"));
    }
    let chunks = n.div_ceil(SAMPLE_CHUNK);
    let px = model.config.pixel_size;
    let maps = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = SAMPLE_CHUNK.min(n - c * SAMPLE_CHUNK);
            let z = model.latent(len, &mut seed::rng(seed, "sample", c as u64));
            maps_from_symmetric_batch(&model.generate(&z)?, px)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Corpus::from_maps(
        maps,
        "synth",
        "gan",
        json!({ "seed": seed, "step": model.step, "config": model.config }),
    )
}
