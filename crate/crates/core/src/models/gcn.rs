use std::borrow::Cow;

use crate::error::Result;
use crate::models::{log_softmax_backward, GraphInput, Gradients, InferenceResult, Mode, ModelConfig, ModelParams};
use crate::numerics::matrix::Matrix;
use crate::numerics::ops::{derive_seed, dropout_mask, log_softmax_rows};
use crate::numerics::sparse::SparseAdjacency;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams<T> {
    pub w1: Matrix<T>,
    pub b1: Matrix<T>,
    pub w2: Matrix<T>,
    pub b2: Matrix<T>,
}

impl<T: Scalar> GcnParams<T> {
    pub fn cast<U: Scalar>(&self) -> GcnParams<U> {
        GcnParams { w1: self.w1.cast(), b1: self.b1.cast(), w2: self.w2.cast(), b2: self.b2.cast() }
    }
}

#[derive(Debug, Clone)]
pub struct GcnCache<T> {
    xw: Matrix<T>,
    z1: Matrix<T>,
    h1_dropped: Matrix<T>,
    drop: Option<Matrix<T>>,
    hw: Matrix<T>,
    log_probs: Matrix<T>,
}

/// `log_softmax(Â·dropout(ReLU(Â·X·W1 + b1))·W2 + b2)`.
pub fn gcn_forward<T: Scalar>(
    params: &GcnParams<T>,
    config: &ModelConfig,
    features: &Matrix<T>,
    norm_adj: &SparseAdjacency<T>,
    mode: Mode,
    edge_weights: Option<&[T]>,
) -> Result<InferenceResult<T>> {
    let input = GraphInput { features, adjacency: norm_adj, edge_weights, feature_mask: None };
    input.check(config.in_dim)?;
    Ok(forward_cached(params, config, &input, mode)?.0)
}

pub(crate) fn forward_cached<T: Scalar>(
    p: &GcnParams<T>,
    config: &ModelConfig,
    input: &GraphInput<'_, T>,
    mode: Mode,
) -> Result<(InferenceResult<T>, GcnCache<T>)> {
    let adj = input.adjacency;
    let ew = input.edge_weights;
    let w1: Cow<Matrix<T>> = match input.feature_mask {
        Some(f) => Cow::Owned(p.w1.scale_rows(f)),
        None => Cow::Borrowed(&p.w1),
    };
    let xw = input.features.matmul(&w1)?;
    let mut z1 = adj.propagate(&xw, ew)?;
    z1.add_row_vector(p.b1.data());
    let h1 = z1.map(|x| if x > T::zero() { x } else { T::zero() });

    let (h1_dropped, drop) = match mode {
        Mode::Train { seed } if config.dropout_rate > 0.0 => {
            let mask = dropout_mask::<T>(h1.rows(), h1.cols(), config.dropout_rate, derive_seed(seed, 0))?;
            let mut d = h1.clone();
            d.hadamard_in_place(&mask);
            (d, Some(mask))
        }
        _ => (h1.clone(), None),
    };
    let hw = h1_dropped.matmul(&p.w2)?;
    let mut z2 = adj.propagate(&hw, ew)?;
    z2.add_row_vector(p.b2.data());
    let log_probs = log_softmax_rows(&z2);
    let predicted = log_probs.argmax_rows();
    let result = InferenceResult { log_probs: log_probs.clone(), predicted, embeddings: h1, attention: None };
    Ok((result, GcnCache { xw, z1, h1_dropped, drop, hw, log_probs }))
}

pub(crate) fn backward<T: Scalar>(
    p: &GcnParams<T>,
    input: &GraphInput<'_, T>,
    c: &GcnCache<T>,
    d_log_probs: &Matrix<T>,
) -> Result<Gradients<T>> {
    let adj = input.adjacency;
    let ew = input.edge_weights;

    let dz2 = log_softmax_backward(&c.log_probs, d_log_probs);
    let db2 = dz2.col_sums();
    let dhw = adj.propagate_t(&dz2, ew)?;
    let mut dedge = ew.map(|_| adj.edge_weight_grad(&dz2, &c.hw));
    let dw2 = c.h1_dropped.t_matmul(&dhw)?;
    let mut dh1 = dhw.matmul_t(&p.w2)?;
    if let Some(mask) = &c.drop {
        dh1.hadamard_in_place(mask);
    }
    for (g, &z) in dh1.data_mut().iter_mut().zip(c.z1.data()) {
        if z <= T::zero() {
            *g = T::zero();
        }
    }
    let dz1 = dh1;
    let db1 = dz1.col_sums();
    let dxw = adj.propagate_t(&dz1, ew)?;
    if let Some(d) = dedge.as_mut() {
        for (a, b) in d.iter_mut().zip(adj.edge_weight_grad(&dz1, &c.xw)) {
            *a += b;
        }
    }
    // gradient w.r.t. the effective (row-scaled) first-layer weight
    let dw1_eff = input.features.t_matmul(&dxw)?;
    let (dw1, dmask) = match input.feature_mask {
        Some(f) => {
            let dmask = (0..p.w1.rows())
                .map(|k| p.w1.row(k).iter().zip(dw1_eff.row(k)).fold(T::zero(), |s, (&w, &g)| s + w * g))
                .collect();
            (dw1_eff.scale_rows(f), Some(dmask))
        }
        None => (dw1_eff, None),
    };
    let params = ModelParams::Gcn(GcnParams {
        w1: dw1,
        b1: Matrix::from_vec(1, db1.len(), db1)?,
        w2: dw2,
        b2: Matrix::from_vec(1, db2.len(), db2)?,
    });
    Ok(Gradients { params, edge_weights: dedge, feature_mask: dmask })
}
