use crate::error::{Error, Result};
use crate::numerics::matrix::{dot, Matrix};
use crate::projection::{Diagnostics, ProjectionMethod, ProjectionResult};
use crate::scalar::Scalar;

/// Eigenpairs of a symmetric matrix by cyclic Jacobi rotations, sorted by
/// descending eigenvalue. `a` is row-major `n × n`; eigenvectors are returned
/// as rows.
pub fn symmetric_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    assert_eq!(a.len(), n * n, "symmetric_eigen shape");
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j].powi(2))
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                // signum(0.0) is 1.0, so theta = 0 gives a 45 degree rotation
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| m[b * n + b].total_cmp(&m[a * n + a]));
    let values = order.iter().map(|&k| m[k * n + k]).collect();
    let vectors = order.iter().map(|&k| (0..n).map(|r| v[r * n + k]).collect()).collect();
    (values, vectors)
}

/// Flips `v` so that its largest-magnitude entry is positive (first wins ties).
fn orient(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn pca_project<T: Scalar>(embeddings: &Matrix<T>) -> Result<ProjectionResult> {
    let (n, d) = embeddings.shape();
    if n < 2 || d < 2 {
        return Err(Error::DegenerateInput(format!("PCA needs at least 2 rows and 2 columns, got {n}x{d}")));
    }
    let first = embeddings.row(0);
    if (1..n).all(|i| embeddings.row(i) == first) {
        return Err(Error::DegenerateInput("fewer than 2 distinct rows".into()));
    }
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, x) in mean.iter_mut().zip(embeddings.row(i)) {
            *m += x.as_f64();
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered: Vec<f64> =
        (0..n).flat_map(|i| embeddings.row(i).iter().zip(&mean).map(|(x, m)| x.as_f64() - m).collect::<Vec<_>>()).collect();

    let mut cov = vec![0.0; d * d];
    for row in centered.chunks(d) {
        for a in 0..d {
            if row[a] == 0.0 {
                continue;
            }
            for b in a..d {
                cov[a * d + b] += row[a] * row[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            cov[a * d + b] /= (n - 1) as f64;
            cov[b * d + a] = cov[a * d + b];
        }
    }
    let (values, mut vectors) = symmetric_eigen(&cov, d);
    let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
    vectors.truncate(2);
    let mut components: [Vec<f64>; 2] = vectors.try_into().expect("two components");
    components.iter_mut().for_each(|c| orient(c));
    let ratio = [values[0].max(0.0) / total, values[1].max(0.0) / total];
    let coords =
        centered.chunks(d).map(|row| [dot(row, &components[0]), dot(row, &components[1])]).collect();
    Ok(ProjectionResult {
        method: ProjectionMethod::Pca,
        coords,
        diagnostics: Diagnostics::Pca { explained_variance_ratio: ratio, components: components.to_vec() },
    })
}
