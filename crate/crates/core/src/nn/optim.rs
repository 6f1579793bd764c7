//! AdamW with decoupled weight decay.
//!
//! ```text
//! m  <- b1 m + (1 - b1) g
//! v  <- b2 v + (1 - b2) g^2
//! m^ =  m / (1 - b1^t),  v^ = v / (1 - b2^t)
//! θ  <- θ - lr (m^ / (sqrt(v^) + eps) + wd θ)
//! ```

use serde::{Deserialize, Serialize};

use super::model::{Gradients, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub config: AdamWConfig,
}

impl OptimizerState {
    pub fn new(param_count: usize, config: AdamWConfig) -> Self {
        Self {
            step: 0,
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            config,
        }
    }

    pub fn for_model(model: &ModelParams, config: AdamWConfig) -> Self {
        Self::new(model.param_count(), config)
    }
}

/// One in-place AdamW update over a flat list of parameter slices.
pub fn adamw_update<'a>(
    params: impl Iterator<Item = &'a mut [f64]>,
    grads: impl Iterator<Item = &'a [f64]>,
    state: &mut OptimizerState,
) {
    state.step += 1;
    let c = state.config;
    let t = state.step as i32;
    let bc1 = 1.0 - c.beta1.powi(t);
    let bc2 = 1.0 - c.beta2.powi(t);
    let mut k = 0;
    for (p, g) in params.zip(grads) {
        debug_assert_eq!(p.len(), g.len());
        for (theta, &grad) in p.iter_mut().zip(g) {
            let m = &mut state.first_moment[k];
            let v = &mut state.second_moment[k];
            *m = c.beta1 * *m + (1.0 - c.beta1) * grad;
            *v = c.beta2 * *v + (1.0 - c.beta2) * grad * grad;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *theta -= c.lr * (m_hat / (v_hat.sqrt() + c.eps) + c.weight_decay * *theta);
            k += 1;
        }
    }
    debug_assert_eq!(k, state.first_moment.len());
}

pub fn adamw_step(model: &mut ModelParams, grads: &Gradients, state: &mut OptimizerState) {
    adamw_update(model.param_slices_mut(), grads.slices(), state);
}
