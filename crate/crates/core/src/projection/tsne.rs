use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::matrix::Matrix;
use crate::projection::pca::pca_project;
use crate::projection::{Diagnostics, ProjectionMethod, ProjectionResult};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iters: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    /// Record the KL divergence every this many iterations.
    pub trace_every: usize,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iters: 1000,
            seed: 0,
            learning_rate: 200.0,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            trace_every: 10,
        }
    }
}

impl TsneConfig {
    /// Checks the configuration against an input of `rows` points.
    pub fn validate(&self, rows: usize) -> Result<()> {
        let limit = (rows as f64 - 1.0) / 3.0;
        if !(self.perplexity < limit) || !(self.perplexity > 0.0) {
            return Err(Error::PerplexityTooLarge { perplexity: self.perplexity, rows, limit });
        }
        if !(self.learning_rate > 0.0) || self.trace_every == 0 {
            return Err(Error::InvalidConfig("t-SNE learning rate and trace interval must be positive".into()));
        }
        Ok(())
    }
}

const ENTROPY_TOL: f64 = 1e-5;
const MAX_BISECTIONS: usize = 50;
const MIN_GAIN: f64 = 0.01;

/// Conditional affinities `p_{j|i}` (row-major `n × n`) calibrated to
/// `perplexity`, and the entropy (nats) each row reached.
pub fn conditional_affinities<T: Scalar>(x: &Matrix<T>, perplexity: f64) -> (Vec<f64>, Vec<f64>) {
    let n = x.rows();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).iter().map(|v| v.as_f64()).collect()).collect();
    let target = perplexity.ln();
    let per_row: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let dist: Vec<f64> = (0..n)
                .map(|j| if i == j { 0.0 } else { rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b) * (a - b)).sum() })
                .collect();
            let d_min = (0..n).filter(|&j| j != i).map(|j| dist[j]).fold(f64::INFINITY, f64::min);
            let mut p = vec![0.0; n];
            let mut beta = 1.0;
            let (mut lo, mut hi) = (0.0, f64::INFINITY);
            let mut entropy = 0.0;
            for _ in 0..MAX_BISECTIONS {
                let mut sum = 0.0;
                let mut weighted = 0.0;
                for j in 0..n {
                    if j == i {
                        p[j] = 0.0;
                        continue;
                    }
                    // shifting by the nearest distance keeps exp() in range
                    let d = dist[j] - d_min;
                    p[j] = (-beta * d).exp();
                    sum += p[j];
                    weighted += d * p[j];
                }
                entropy = sum.ln() + beta * weighted / sum;
                p.iter_mut().for_each(|v| *v /= sum);
                let diff = entropy - target;
                if diff.abs() < ENTROPY_TOL {
                    break;
                }
                if diff > 0.0 {
                    lo = beta;
                    beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
                } else {
                    hi = beta;
                    beta = (beta + lo) / 2.0;
                }
            }
            (p, entropy)
        })
        .collect();
    let mut p = Vec::with_capacity(n * n);
    let mut entropies = Vec::with_capacity(n);
    for (row, h) in per_row {
        p.extend(row);
        entropies.push(h);
    }
    (p, entropies)
}

/// Exact t-SNE. `observer(iter, iters)` returning `false` cancels.
pub fn tsne_project_observed<T: Scalar>(
    embeddings: &Matrix<T>,
    cfg: &TsneConfig,
    observer: &mut dyn FnMut(usize, usize) -> bool,
) -> Result<ProjectionResult> {
    let n = embeddings.rows();
    cfg.validate(n)?;

    let (cond, _) = conditional_affinities(embeddings, cfg.perplexity);
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = ((cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64)).max(1e-12);
        }
    }
    for i in 0..n {
        p[i * n + i] = 0.0;
    }

    let mut y = initial_layout(embeddings, cfg.seed)?;
    let mut velocity = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut kl_trace = Vec::new();
    for iter in 0..cfg.iters {
        let exaggerate = iter < cfg.exaggeration_iters;
        let factor = if exaggerate { cfg.exaggeration } else { 1.0 };
        let momentum = if iter < cfg.exaggeration_iters { 0.5 } else { 0.8 };
        let record = (iter + 1) % cfg.trace_every == 0 || iter + 1 == cfg.iters;
        let (grad, kl) = gradient(&p, &y, factor, record);
        if let Some(kl) = kl {
            kl_trace.push((iter + 1, kl));
        }
        for i in 0..n {
            for a in 0..2 {
                let g = grad[i][a];
                gains[i][a] = if (g > 0.0) != (velocity[i][a] > 0.0) { gains[i][a] + 0.2 } else { gains[i][a] * 0.8 };
                gains[i][a] = gains[i][a].max(MIN_GAIN);
                velocity[i][a] = momentum * velocity[i][a] - cfg.learning_rate * gains[i][a] * g;
                y[i][a] += velocity[i][a];
            }
        }
        let mean = [y.iter().map(|v| v[0]).sum::<f64>() / n as f64, y.iter().map(|v| v[1]).sum::<f64>() / n as f64];
        y.iter_mut().for_each(|v| {
            v[0] -= mean[0];
            v[1] -= mean[1];
        });
        if y.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(Error::NonFiniteLoss { epoch: iter });
        }
        if !observer(iter + 1, cfg.iters) {
            return Err(Error::Cancelled);
        }
    }
    let final_kl = kl_trace.last().map(|&(_, kl)| kl).unwrap_or(f64::NAN);
    Ok(ProjectionResult {
        method: ProjectionMethod::Tsne,
        coords: y,
        diagnostics: Diagnostics::Tsne { perplexity: cfg.perplexity, final_kl, kl_trace },
    })
}

pub fn tsne_project<T: Scalar>(embeddings: &Matrix<T>, cfg: &TsneConfig) -> Result<ProjectionResult> {
    tsne_project_observed(embeddings, cfg, &mut |_, _| true)
}

/// PCA coordinates rescaled to standard deviation 1e-4, plus seeded jitter
/// (std 1e-6) that separates coincident points.
fn initial_layout<T: Scalar>(x: &Matrix<T>, seed: u64) -> Result<Vec<[f64; 2]>> {
    let n = x.rows();
    let base = match pca_project(x) {
        Ok(r) => r.coords,
        Err(Error::DegenerateInput(_)) => vec![[0.0, 0.0]; n],
        Err(e) => return Err(e),
    };
    let sd = {
        let m: f64 = base.iter().map(|c| c[0]).sum::<f64>() / n as f64;
        (base.iter().map(|c| (c[0] - m).powi(2)).sum::<f64>() / n as f64).sqrt()
    };
    let scale = if sd > 0.0 { 1e-4 / sd } else { 0.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, 1e-6).expect("valid normal");
    Ok(base.iter().map(|c| [c[0] * scale + jitter.sample(&mut rng), c[1] * scale + jitter.sample(&mut rng)]).collect())
}

/// KL gradient for every point and, when asked, `KL(P‖Q)` with the
/// un-exaggerated `P`.
fn gradient(p: &[f64], y: &[[f64; 2]], factor: f64, with_kl: bool) -> (Vec<[f64; 2]>, Option<f64>) {
    let n = y.len();
    let row_z: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let yi = y[i];
            let mut s = 0.0;
            for (j, yj) in y.iter().enumerate() {
                if j != i {
                    let (dx, dy) = (yi[0] - yj[0], yi[1] - yj[1]);
                    s += 1.0 / (1.0 + dx * dx + dy * dy);
                }
            }
            s
        })
        .collect();
    let z: f64 = row_z.iter().sum();
    let inv_z = 1.0 / z;
    let rows: Vec<([f64; 2], f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let yi = y[i];
            let pi = &p[i * n..(i + 1) * n];
            let mut g = [0.0, 0.0];
            let mut kl = 0.0;
            for (j, yj) in y.iter().enumerate() {
                if j == i {
                    continue;
                }
                let (dx, dy) = (yi[0] - yj[0], yi[1] - yj[1]);
                let num = 1.0 / (1.0 + dx * dx + dy * dy);
                let q = (num * inv_z).max(1e-12);
                let w = (factor * pi[j] - q) * num;
                g[0] += w * dx;
                g[1] += w * dy;
                if with_kl {
                    kl += pi[j] * (pi[j] / q).ln();
                }
            }
            ([4.0 * g[0], 4.0 * g[1]], kl)
        })
        .collect();
    let kl = with_kl.then(|| rows.iter().map(|r| r.1).sum());
    (rows.into_iter().map(|r| r.0).collect(), kl)
}
