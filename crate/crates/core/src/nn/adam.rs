use serde::{Deserialize, Serialize};

use super::layers::Param;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::argument(format!("invalid Adam hyperparameters {self:?}")))
        }
    }
}

/// First and second moment estimates for an ordered parameter list.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(config: AdamConfig, params: &[&mut Param<T>]) -> Self {
        let zeros = |p: &&mut Param<T>| vec![T::zero(); p.tensor.len()];
        AdamState {
            config,
            step: 0,
            m: params.iter().map(zeros).collect(),
            v: params.iter().map(zeros).collect(),
        }
    }

    /// One bias-corrected update from the gradients stored in `params`.
    /// Frozen parameters keep their values and moments.
    pub fn step(&mut self, params: Vec<&mut Param<T>>) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::shape("adam_step", &[self.m.len()], &[params.len()]));
        }
        for (i, p) in params.iter().enumerate() {
            if p.tensor.len() != self.m[i].len() {
                return Err(Error::shape("adam_step", &[self.m[i].len()], p.tensor.shape()));
            }
        }
        self.step += 1;
        let c = self.config;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let t = self.step as i32;
        let bc1 = T::one() - T::of(c.beta1.powi(t));
        let bc2 = T::one() - T::of(c.beta2.powi(t));
        let (lr, eps) = (T::of(c.lr), T::of(c.eps));
        for ((p, m), v) in params.into_iter().zip(&mut self.m).zip(&mut self.v) {
            if p.frozen {
                continue;
            }
            let grad = p.tensor.grad().expect("parameter gradient").to_vec();
            for (((w, g), mi), vi) in p.tensor.data_mut().iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + (T::one() - b1) * g;
                *vi = b2 * *vi + (T::one() - b2) * g * g;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
