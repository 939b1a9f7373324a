use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Coupled L2: `weight_decay · θ` is added to the gradient.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 0.005, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 5e-4 }
    }
}

/// Adam moments for a fixed list of parameter buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub first_moment: Vec<Vec<T>>,
    pub second_moment: Vec<Vec<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    /// Zero moments shaped like `sizes`.
    pub fn new(config: AdamConfig, sizes: &[usize]) -> Self {
        Self {
            config,
            step: 0,
            first_moment: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            second_moment: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step<T: Scalar>(params: &mut [&mut [T]], grads: &[&[T]], state: &mut OptimizerState<T>) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} parameter buffers, {} gradients, {} moment buffers",
            params.len(),
            grads.len(),
            state.first_moment.len()
        )));
    }
    for (k, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != state.first_moment[k].len() {
            return Err(Error::ShapeMismatch(format!(
                "buffer {k}: {} params, {} grads, {} moments",
                p.len(),
                g.len(),
                state.first_moment[k].len()
            )));
        }
    }
    state.step += 1;
    let AdamConfig { lr, beta1, beta2, eps, weight_decay } = state.config;
    let t = state.step as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = &mut state.first_moment[k];
        let v = &mut state.second_moment[k];
        for i in 0..p.len() {
            let theta = p[i].as_f64();
            let grad = g[i].as_f64() + weight_decay * theta;
            let mi = beta1 * m[i].as_f64() + (1.0 - beta1) * grad;
            let vi = beta2 * v[i].as_f64() + (1.0 - beta2) * grad * grad;
            m[i] = T::of(mi);
            v[i] = T::of(vi);
            let update = lr * (mi / bc1) / ((vi / bc2).sqrt() + eps);
            p[i] = T::of(theta - update);
        }
    }
    Ok(())
}
