use std::borrow::Cow;

use crate::error::Result;
use crate::models::{
    log_softmax_backward, AttentionMaps, GraphInput, Gradients, HiddenActivation, InferenceResult, Mode, ModelConfig,
    ModelParams,
};
use crate::numerics::matrix::{dot, Matrix};
use crate::numerics::ops::{derive_seed, dropout_mask, log_softmax_rows, Activation};
use crate::numerics::sparse::SparseAdjacency;
use crate::scalar::Scalar;

/// One multi-head attention layer; head outputs are concatenated.
///
/// For target `i` and source `j ∈ N(i) ∪ {i}`, head `h` scores
/// `e_ij = LeakyReLU(att_dst[h]·W_h x_i + att_src[h]·W_h x_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GatLayerParams<T> {
    pub heads: usize,
    /// `in × heads·dim`, head `h` owns columns `h·dim..(h+1)·dim`.
    pub weight: Matrix<T>,
    /// `heads × dim`, applied to the message source.
    pub att_src: Matrix<T>,
    /// `heads × dim`, applied to the aggregating target.
    pub att_dst: Matrix<T>,
    pub bias: Matrix<T>,
}

impl<T: Scalar> GatLayerParams<T> {
    pub fn dim(&self) -> usize {
        self.weight.cols() / self.heads
    }

    pub(crate) fn tensors(&self) -> Vec<&Matrix<T>> {
        vec![&self.weight, &self.att_src, &self.att_dst, &self.bias]
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut Matrix<T>> {
        vec![&mut self.weight, &mut self.att_src, &mut self.att_dst, &mut self.bias]
    }

    pub fn cast<U: Scalar>(&self) -> GatLayerParams<U> {
        GatLayerParams {
            heads: self.heads,
            weight: self.weight.cast(),
            att_src: self.att_src.cast(),
            att_dst: self.att_dst.cast(),
            bias: self.bias.cast(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatParams<T> {
    pub layer1: GatLayerParams<T>,
    pub layer2: GatLayerParams<T>,
}

impl<T: Scalar> GatParams<T> {
    pub fn cast<U: Scalar>(&self) -> GatParams<U> {
        GatParams { layer1: self.layer1.cast(), layer2: self.layer2.cast() }
    }
}

#[derive(Debug, Clone)]
pub struct LayerCache<T> {
    input_dropped: Matrix<T>,
    input_drop: Option<Matrix<T>>,
    projected: Matrix<T>,
    /// Pre-LeakyReLU scores, `nnz × heads`.
    raw: Vec<T>,
    /// Edge-weighted, renormalized attention, `nnz × heads`.
    beta: Vec<T>,
    /// `exp(e − max) / Z`, the attention before edge weighting, `nnz × heads`.
    unweighted: Vec<T>,
    att_drop: Option<Vec<T>>,
    output: Matrix<T>,
}

#[derive(Debug, Clone)]
pub struct GatCache<T> {
    layer1: LayerCache<T>,
    layer2: LayerCache<T>,
    log_probs: Matrix<T>,
}

struct Dropout {
    rate: f64,
    input_seed: u64,
    attention_seed: u64,
}

fn layer_forward<T: Scalar>(
    p: &GatLayerParams<T>,
    x: &Matrix<T>,
    adj: &SparseAdjacency<T>,
    edge_weights: Option<&[T]>,
    feature_mask: Option<&[T]>,
    slope: f64,
    dropout: Option<Dropout>,
) -> Result<LayerCache<T>> {
    let heads = p.heads;
    let dim = p.dim();
    let n = adj.num_nodes();
    let nnz = adj.nnz();
    let leaky = Activation::LeakyRelu { slope };

    let (input_dropped, input_drop) = match &dropout {
        Some(d) => {
            let mask = dropout_mask::<T>(x.rows(), x.cols(), d.rate, d.input_seed)?;
            let mut xd = x.clone();
            xd.hadamard_in_place(&mask);
            (xd, Some(mask))
        }
        None => (x.clone(), None),
    };
    let w: Cow<Matrix<T>> = match feature_mask {
        Some(f) => Cow::Owned(p.weight.scale_rows(f)),
        None => Cow::Borrowed(&p.weight),
    };
    let projected = input_dropped.matmul(&w)?;

    let mut s_src = vec![T::zero(); n * heads];
    let mut s_dst = vec![T::zero(); n * heads];
    for i in 0..n {
        let row = projected.row(i);
        for h in 0..heads {
            let block = &row[h * dim..(h + 1) * dim];
            s_src[i * heads + h] = dot(block, p.att_src.row(h));
            s_dst[i * heads + h] = dot(block, p.att_dst.row(h));
        }
    }

    let mut raw = vec![T::zero(); nnz * heads];
    let mut beta = vec![T::zero(); nnz * heads];
    let mut unweighted = vec![T::zero(); nnz * heads];
    for i in 0..n {
        let range = adj.row_range(i);
        for h in 0..heads {
            let mut max = T::neg_infinity();
            for e in range.clone() {
                let r = s_dst[i * heads + h] + s_src[adj.col(e) * heads + h];
                raw[e * heads + h] = r;
                max = max.max(leaky.apply(r));
            }
            let mut z = T::zero();
            for e in range.clone() {
                let ex = (leaky.apply(raw[e * heads + h]) - max).exp();
                unweighted[e * heads + h] = ex;
                let u = match (edge_weights, adj.entry_edge(e)) {
                    (Some(w), Some(k)) => ex * w[k],
                    _ => ex,
                };
                beta[e * heads + h] = u;
                z += u;
            }
            for e in range.clone() {
                beta[e * heads + h] /= z;
                unweighted[e * heads + h] /= z;
            }
        }
    }

    let att_drop = match &dropout {
        Some(d) if d.rate > 0.0 => Some(dropout_mask::<T>(nnz, heads, d.rate, d.attention_seed)?.into_vec()),
        _ => None,
    };

    let mut output = Matrix::zeros(n, heads * dim);
    for i in 0..n {
        for e in adj.row_range(i) {
            let src = projected.row(adj.col(e));
            for h in 0..heads {
                let mut a = beta[e * heads + h];
                if let Some(m) = &att_drop {
                    a *= m[e * heads + h];
                }
                let out = &mut output.row_mut(i)[h * dim..(h + 1) * dim];
                for (o, &v) in out.iter_mut().zip(&src[h * dim..(h + 1) * dim]) {
                    *o += a * v;
                }
            }
        }
    }
    output.add_row_vector(p.bias.data());

    Ok(LayerCache { input_dropped, input_drop, projected, raw, beta, unweighted, att_drop, output })
}

struct LayerGrads<T> {
    params: GatLayerParams<T>,
    input: Option<Matrix<T>>,
    feature_mask: Option<Vec<T>>,
}

#[allow(clippy::too_many_arguments)]
fn layer_backward<T: Scalar>(
    p: &GatLayerParams<T>,
    c: &LayerCache<T>,
    adj: &SparseAdjacency<T>,
    feature_mask: Option<&[T]>,
    slope: f64,
    d_out: &Matrix<T>,
    d_edge: Option<&mut [T]>,
    want_input: bool,
) -> Result<LayerGrads<T>> {
    let heads = p.heads;
    let dim = p.dim();
    let n = adj.num_nodes();
    let nnz = adj.nnz();
    let leaky = Activation::LeakyRelu { slope };

    let bias = d_out.col_sums();
    let mut d_proj = Matrix::zeros(n, heads * dim);
    let mut d_beta = vec![T::zero(); nnz * heads];
    for i in 0..n {
        let g = d_out.row(i);
        for e in adj.row_range(i) {
            let j = adj.col(e);
            for h in 0..heads {
                let gb = &g[h * dim..(h + 1) * dim];
                let mut db = dot(gb, &c.projected.row(j)[h * dim..(h + 1) * dim]);
                let mut a = c.beta[e * heads + h];
                if let Some(m) = &c.att_drop {
                    a *= m[e * heads + h];
                    db *= m[e * heads + h];
                }
                d_beta[e * heads + h] = db;
                for (o, &v) in d_proj.row_mut(j)[h * dim..(h + 1) * dim].iter_mut().zip(gb) {
                    *o += a * v;
                }
            }
        }
    }

    let mut ds_src = vec![T::zero(); n * heads];
    let mut ds_dst = vec![T::zero(); n * heads];
    let mut d_edge = d_edge;
    for i in 0..n {
        let range = adj.row_range(i);
        for h in 0..heads {
            let s = range.clone().fold(T::zero(), |s, e| s + c.beta[e * heads + h] * d_beta[e * heads + h]);
            for e in range.clone() {
                let k = e * heads + h;
                let centered = d_beta[k] - s;
                if let (Some(de), Some(edge)) = (d_edge.as_deref_mut(), adj.entry_edge(e)) {
                    de[edge] += c.unweighted[k] * centered;
                }
                let d_raw = c.beta[k] * centered * leaky.derivative(c.raw[k]);
                ds_dst[i * heads + h] += d_raw;
                ds_src[adj.col(e) * heads + h] += d_raw;
            }
        }
    }

    let mut att_src = Matrix::zeros(heads, dim);
    let mut att_dst = Matrix::zeros(heads, dim);
    for j in 0..n {
        for h in 0..heads {
            let (gs, gd) = (ds_src[j * heads + h], ds_dst[j * heads + h]);
            if gs == T::zero() && gd == T::zero() {
                continue;
            }
            let block = &c.projected.row(j)[h * dim..(h + 1) * dim];
            for (d, &v) in block.iter().enumerate() {
                let a = att_src.get(h, d) + gs * v;
                att_src.set(h, d, a);
                let b = att_dst.get(h, d) + gd * v;
                att_dst.set(h, d, b);
            }
            let (asrc, adst) = (p.att_src.row(h), p.att_dst.row(h));
            for (d, o) in d_proj.row_mut(j)[h * dim..(h + 1) * dim].iter_mut().enumerate() {
                *o += gs * asrc[d] + gd * adst[d];
            }
        }
    }

    let dw_eff = c.input_dropped.t_matmul(&d_proj)?;
    let (weight, dmask) = match feature_mask {
        Some(f) => {
            let dm = (0..p.weight.rows())
                .map(|k| p.weight.row(k).iter().zip(dw_eff.row(k)).fold(T::zero(), |s, (&w, &g)| s + w * g))
                .collect();
            (dw_eff.scale_rows(f), Some(dm))
        }
        None => (dw_eff, None),
    };
    let input = if want_input {
        let w: Cow<Matrix<T>> = match feature_mask {
            Some(f) => Cow::Owned(p.weight.scale_rows(f)),
            None => Cow::Borrowed(&p.weight),
        };
        let mut dx = d_proj.matmul_t(&w)?;
        if let Some(m) = &c.input_drop {
            dx.hadamard_in_place(m);
        }
        Some(dx)
    } else {
        None
    };
    Ok(LayerGrads {
        params: GatLayerParams { heads, weight, att_src, att_dst, bias: Matrix::from_vec(1, bias.len(), bias)? },
        input,
        feature_mask: dmask,
    })
}

fn hidden_activation(kind: HiddenActivation) -> Activation {
    match kind {
        HiddenActivation::Relu => Activation::Relu,
        HiddenActivation::Elu => Activation::Elu,
    }
}

/// Two-layer GAT over `adj` (self-loops are part of the operator).
pub fn gat_forward<T: Scalar>(
    params: &GatParams<T>,
    config: &ModelConfig,
    features: &Matrix<T>,
    adj: &SparseAdjacency<T>,
    mode: Mode,
    edge_weights: Option<&[T]>,
) -> Result<InferenceResult<T>> {
    let input = GraphInput { features, adjacency: adj, edge_weights, feature_mask: None };
    input.check(config.in_dim)?;
    Ok(forward_cached(params, config, &input, mode)?.0)
}

pub(crate) fn forward_cached<T: Scalar>(
    p: &GatParams<T>,
    config: &ModelConfig,
    input: &GraphInput<'_, T>,
    mode: Mode,
) -> Result<(InferenceResult<T>, GatCache<T>)> {
    let dropout = |k: u64| match mode {
        Mode::Train { seed } if config.dropout_rate > 0.0 => Some(Dropout {
            rate: config.dropout_rate,
            input_seed: derive_seed(seed, 2 * k),
            attention_seed: derive_seed(seed, 2 * k + 1),
        }),
        _ => None,
    };
    let act = hidden_activation(config.activation);
    let adj = input.adjacency;
    let l1 = layer_forward(
        &p.layer1,
        input.features,
        adj,
        input.edge_weights,
        input.feature_mask,
        config.leaky_slope,
        dropout(0),
    )?;
    let hidden = l1.output.map(|x| act.apply(x));
    let l2 = layer_forward(&p.layer2, &hidden, adj, input.edge_weights, None, config.leaky_slope, dropout(1))?;
    let log_probs = log_softmax_rows(&l2.output);
    let predicted = log_probs.argmax_rows();
    let attention = AttentionMaps { heads: p.layer1.heads, layer1: l1.beta.clone(), layer2: l2.beta.clone() };
    let result = InferenceResult { log_probs: log_probs.clone(), predicted, embeddings: hidden, attention: Some(attention) };
    Ok((result, GatCache { layer1: l1, layer2: l2, log_probs }))
}

pub(crate) fn backward<T: Scalar>(
    p: &GatParams<T>,
    config: &ModelConfig,
    input: &GraphInput<'_, T>,
    c: &GatCache<T>,
    d_log_probs: &Matrix<T>,
) -> Result<Gradients<T>> {
    let adj = input.adjacency;
    let act = hidden_activation(config.activation);
    let mut d_edge = input.edge_weights.map(|w| vec![T::zero(); w.len()]);

    let dz2 = log_softmax_backward(&c.log_probs, d_log_probs);
    let g2 = layer_backward(&p.layer2, &c.layer2, adj, None, config.leaky_slope, &dz2, d_edge.as_deref_mut(), true)?;
    let mut d_hidden = g2.input.expect("requested");
    for (g, &pre) in d_hidden.data_mut().iter_mut().zip(c.layer1.output.data()) {
        *g *= act.derivative(pre);
    }
    let g1 = layer_backward(
        &p.layer1,
        &c.layer1,
        adj,
        input.feature_mask,
        config.leaky_slope,
        &d_hidden,
        d_edge.as_deref_mut(),
        false,
    )?;
    Ok(Gradients {
        params: ModelParams::Gat(GatParams { layer1: g1.params, layer2: g2.params }),
        edge_weights: d_edge,
        feature_mask: g1.feature_mask,
    })
}
