//! Adam optimization under the Noam learning-rate schedule.

use crate::segment::SegmentSample;

use super::backward::compute_gradients;
use super::params::{ModelConfig, Parameters};
use super::ModelError;

/// Optimizer and schedule settings. The learning rate at step t is
/// scale · d_model^(-1/2) · min(t^(-1/2), t · warmup^(-3/2)); at the
/// full-scale hidden size of 1024 the leading coefficient is 1/32 = 0.03125.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub warmup_steps: u64,
    /// Multiplier on the schedule.
    pub scale: f64,
    pub steps: u64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.98,
            epsilon: 1e-9,
            warmup_steps: 4000,
            scale: 1.0,
            steps: 1000,
            seed: 0,
        }
    }
}

/// Noam rate at 1-based step t.
pub fn noam_rate(d_model: usize, scale: f64, warmup_steps: u64, t: u64) -> f64 {
    assert!(t >= 1, "schedule steps are 1-based");
    let t = t as f64;
    let w = warmup_steps as f64;
    scale * (d_model as f64).powf(-0.5) * (t.powf(-0.5)).min(t * w.powf(-1.5))
}

/// First/second moment accumulators, shaped like the parameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Parameters,
    pub v: Parameters,
    pub step: u64,
}

impl AdamState {
    pub fn new(cfg: &ModelConfig) -> Self {
        Self { m: Parameters::zeros(cfg), v: Parameters::zeros(cfg), step: 0 }
    }
}

/// One optimization step over a batch. Returns the batch loss measured
/// before the update. Deterministic given parameters, state, and batch.
pub fn train_step(
    params: &mut Parameters,
    cfg: &ModelConfig,
    train: &TrainConfig,
    state: &mut AdamState,
    batch: &[SegmentSample],
) -> Result<f64, ModelError> {
    let (loss, grads) = compute_gradients(params, cfg, batch)?;
    for (name, tensor) in grads.tensors() {
        if tensor.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteGradient { tensor: name });
        }
    }
    state.step += 1;
    let t = state.step;
    let lr = noam_rate(cfg.d_model, train.scale, train.warmup_steps, t);
    let bias1 = 1.0 - train.beta1.powi(t as i32);
    let bias2 = 1.0 - train.beta2.powi(t as i32);
    let mut p_tensors = params.tensors_mut();
    let mut m_tensors = state.m.tensors_mut();
    let mut v_tensors = state.v.tensors_mut();
    let g_tensors = grads.tensors();
    for idx in 0..p_tensors.len() {
        let p = &mut p_tensors[idx];
        let m = &mut m_tensors[idx];
        let v = &mut v_tensors[idx];
        let g = g_tensors[idx].1;
        for k in 0..p.len() {
            m[k] = train.beta1 * m[k] + (1.0 - train.beta1) * g[k];
            v[k] = train.beta2 * v[k] + (1.0 - train.beta2) * g[k] * g[k];
            let m_hat = m[k] / bias1;
            let v_hat = v[k] / bias2;
            p[k] -= lr * m_hat / (v_hat.sqrt() + train.epsilon);
        }
    }
    Ok(loss)
}
