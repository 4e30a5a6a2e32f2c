use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use super::{d_loss, g_loss, GanModel};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::nn::HasParams;
use crate::raster::to_symmetric_range;
use crate::seed;
use crate::Tensor;

/// Losses and mean discriminator outputs of one training iteration (the
/// last discriminator update's values when `d_steps_per_g_step > 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub d_loss: f64,
    pub g_loss: f64,
    pub d_real: f64,
    pub d_fake: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub records: Vec<StepRecord>,
}

impl TrainingLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `step,d_loss,g_loss,d_real,d_fake` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,d_loss,g_loss,d_real,d_fake\n");
        for r in &self.records {
            out.push_str(&format!("{},{},{},{},{}\n", r.step, r.d_loss, r.g_loss, r.d_real, r.d_fake));
        }
        out
    }
}

/// Epoch-wise shuffled corpus order, addressed by a global draw counter so
/// that any step can be reproduced from the step number alone.
struct Sampler {
    data: Vec<Vec<f64>>,
    width: usize,
    seed: u64,
    epoch: Option<(u64, Vec<usize>)>,
}

impl Sampler {
    fn index(&mut self, draw: u64) -> usize {
        let n = self.data.len() as u64;
        let epoch = draw / n;
        if self.epoch.as_ref().is_none_or(|(e, _)| *e != epoch) {
            use rand::seq::SliceRandom;
            let mut perm: Vec<usize> = (0..self.data.len()).collect();
            perm.shuffle(&mut seed::rng(self.seed, "epoch", epoch));
            self.epoch = Some((epoch, perm));
        }
        self.epoch.as_ref().expect("epoch order").1[(draw % n) as usize]
    }

    fn batch(&mut self, first_draw: u64, size: usize) -> Tensor {
        let w = self.width;
        let mut data = Vec::with_capacity(size * w * w);
        for b in 0..size as u64 {
            let i = self.index(first_draw + b);
            data.extend_from_slice(&self.data[i]);
        }
        Tensor::from_vec(vec![size, 1, w, w], data).expect("batch shape")
    }
}

/// Run `steps` iterations of `d_steps_per_g_step` discriminator updates
/// followed by one generator update. `callback` sees the model after every
/// iteration and may stop training early.
pub fn train(
    model: &mut GanModel,
    corpus: &Corpus,
    steps: u64,
    mut callback: impl FnMut(&GanModel, &StepRecord) -> ControlFlow<()>,
) -> Result<TrainingLog> {
    let w = model.config.output_width;
    if corpus.width() != w {
        return Err(Error::argument(format!("corpus maps are {} px wide, model expects {w}", corpus.width())));
    }
    let mut sampler = Sampler {
        data: corpus.maps().iter().map(|m| to_symmetric_range(m).into_data()).collect(),
        width: w,
        seed: model.config.seed,
        epoch: None,
    };
    let (batch, d_steps) = (model.config.batch_size, model.config.d_steps_per_g_step);
    let mut log = TrainingLog::default();
    for _ in 0..steps {
        let step = model.step;
        let mut d_out = None;
        for k in 0..d_steps as u64 {
            let update = step * d_steps as u64 + k;
            let real = sampler.batch(update * batch as u64, batch);
            let z = model.latent(batch, &mut seed::rng(model.config.seed, "z-discriminator", update));
            model.discriminator.zero_grad();
            let out = d_loss(model, &real, &z)?;
            model.opt_d.step(model.discriminator.params_mut())?;
            d_out = Some(out);
        }
        let d_out = d_out.expect("d_steps >= 1");

        let z = model.latent(batch, &mut seed::rng(model.config.seed, "z-generator", step));
        model.generator.zero_grad();
        let g_out = g_loss(model, &z)?;
        model.opt_g.step(model.generator.params_mut())?;

        let record = StepRecord {
            step,
            d_loss: d_out.loss,
            g_loss: g_out.loss,
            d_real: d_out.d_real,
            d_fake: d_out.d_fake,
        };
        if !record.d_loss.is_finite() || !record.g_loss.is_finite() {
            return Err(Error::Training {
                step,
                message: format!("non-finite loss (L_D = {}, L_G = {})", record.d_loss, record.g_loss),
            });
        }
        model.step += 1;
        log.records.push(record);
        if callback(model, &record).is_break() {
            break;
        }
    }
    Ok(log)
}
