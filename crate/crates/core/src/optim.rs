//! Adam, the Noam warmup schedule, and checkpoint averaging.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ParamVector;

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
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

/// Moment accumulators and step counter for one parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, len: usize) -> Result<Self> {
        for (name, beta) in [("beta1", config.beta1), ("beta2", config.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::InvalidArgument(format!("{name} = {beta} outside [0, 1)")));
            }
        }
        Ok(AdamState {
            config,
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        })
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    /// One bias-corrected Adam update. A non-finite gradient leaves both the
    /// state and the parameters untouched.
    pub fn update(&mut self, params: &mut ParamVector, grad: &[f64]) -> Result<()> {
        if grad.len() != params.len() || self.m.len() != params.len() {
            return Err(Error::Shape(format!(
                "adam: params {}, grad {}, state {}",
                params.len(),
                grad.len(),
                self.m.len()
            )));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        self.step += 1;
        let bias1 = 1.0 - beta1.powi(self.step as i32);
        let bias2 = 1.0 - beta2.powi(self.step as i32);
        for (((p, &g), m), v) in params
            .values_mut()
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// Functional form of [`AdamState::update`].
pub fn adam_step(mut state: AdamState, mut params: ParamVector, grad: &[f64]) -> Result<(AdamState, ParamVector)> {
    state.update(&mut params, grad)?;
    Ok((state, params))
}

/// `factor · dim^-0.5 · min(step^-0.5, step · warmup^-1.5)`.
pub fn noam_lr(step: u64, warmup: u64, factor: f64, dim: usize) -> f64 {
    let step = step.max(1) as f64;
    let warmup = warmup.max(1) as f64;
    factor * (dim as f64).powf(-0.5) * step.powf(-0.5).min(step * warmup.powf(-1.5))
}

/// Rescales `grad` in place so its L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = crate::model::l2_norm(grad);
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= scale);
    }
    norm
}

/// Elementwise mean of parameter vectors sharing one architecture.
pub fn average_checkpoints(checkpoints: &[&ParamVector]) -> Result<ParamVector> {
    let (first, rest) = checkpoints
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("no checkpoints to average".into()))?;
    let mut sum = first.values().to_vec();
    for ckpt in rest {
        first.ensure_same_arch(ckpt)?;
        for (s, v) in sum.iter_mut().zip(ckpt.values()) {
            *s += v;
        }
    }
    let n = checkpoints.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    ParamVector::new(*first.arch(), sum)
}

/// Picks the `n` checkpoints with the lowest validation error (all of them if
/// fewer exist) and averages them. Ties keep the earlier checkpoint.
pub fn average_best(history: &[(f64, ParamVector)], n: usize) -> Result<ParamVector> {
    let mut order: Vec<usize> = (0..history.len()).collect();
    order.sort_by(|&a, &b| history[a].0.total_cmp(&history[b].0).then(a.cmp(&b)));
    let picked: Vec<&ParamVector> = order.iter().take(n.max(1)).map(|&i| &history[i].1).collect();
    average_checkpoints(&picked)
}
