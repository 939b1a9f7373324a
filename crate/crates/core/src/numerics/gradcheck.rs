//! Central-difference verification of analytic gradients.
//!
//! Every hand-derived backward pass in the crate (GCN, GAT, explainer masks)
//! is held to this harness in its tests.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub eps: f64,
    pub tolerance: f64,
    /// Coordinates checked at most; larger parameter vectors are sampled.
    pub max_coords: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { eps: 1e-3, tolerance: 1e-4, max_coords: 400, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_coord: usize,
    pub coords_checked: usize,
    pub pass: bool,
}

/// `|a − b| / max(|a|, |b|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares the gradient returned by `loss_and_grad` with central differences
/// of its loss. `loss_and_grad` must be deterministic; a mismatch between two
/// evaluations at `params` is reported as [`Error::NondeterministicLoss`].
pub fn finite_difference_check<F>(mut loss_and_grad: F, params: &[f64], opts: GradCheckOptions) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    if !(opts.eps > 0.0) {
        return Err(Error::InvalidConfig(format!("finite-difference eps must be positive, got {}", opts.eps)));
    }
    let (l0, grad) = loss_and_grad(params);
    let (l1, _) = loss_and_grad(params);
    if l0.to_bits() != l1.to_bits() {
        return Err(Error::NondeterministicLoss { first: l0, second: l1 });
    }
    if grad.len() != params.len() {
        return Err(Error::ShapeMismatch(format!("{} gradient entries for {} parameters", grad.len(), params.len())));
    }
    let coords: Vec<usize> = if params.len() <= opts.max_coords {
        (0..params.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut c = sample(&mut rng, params.len(), opts.max_coords).into_vec();
        c.sort_unstable();
        c
    };
    let mut theta = params.to_vec();
    let mut worst = (0.0f64, 0usize);
    for &k in &coords {
        let orig = theta[k];
        theta[k] = orig + opts.eps;
        let (lp, _) = loss_and_grad(&theta);
        theta[k] = orig - opts.eps;
        let (lm, _) = loss_and_grad(&theta);
        theta[k] = orig;
        let numeric = (lp - lm) / (2.0 * opts.eps);
        let err = relative_error(grad[k], numeric);
        if err > worst.0 || err.is_nan() {
            worst = (err, k);
        }
    }
    Ok(GradCheckReport {
        max_relative_error: worst.0,
        worst_coord: worst.1,
        coords_checked: coords.len(),
        pass: worst.0 < opts.tolerance,
    })
}
