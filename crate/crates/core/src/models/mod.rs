//! Two-layer GCN and GAT node classifiers.
//!
//! Both architectures share one calling convention: a [`GraphInput`] holding
//! features and a [`SparseAdjacency`], optional per-edge multipliers
//! (explanation edge mask) and an optional per-feature multiplier
//! (explanation feature mask). Backward passes are hand-derived and return
//! gradients for every parameter and, when requested, for the two masks.

pub mod gat;
pub mod gcn;
pub mod weights;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::matrix::Matrix;
use crate::numerics::ops::DEFAULT_LEAKY_SLOPE;
use crate::numerics::sparse::SparseAdjacency;
use crate::scalar::Scalar;

pub use gat::{GatCache, GatLayerParams, GatParams};
pub use gcn::{GcnCache, GcnParams};
pub use weights::{load_weights, load_weights_expecting, save_weights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Gcn,
    Gat,
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Arch::Gcn => "gcn",
            Arch::Gat => "gat",
        })
    }
}

impl std::str::FromStr for Arch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(Arch::Gcn),
            "gat" => Ok(Arch::Gat),
            other => Err(Error::InvalidConfig(format!("unknown architecture {other:?}"))),
        }
    }
}

/// Activation after the first layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HiddenActivation {
    Relu,
    Elu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub arch: Arch,
    pub in_dim: usize,
    /// GCN hidden width, or per-head width for GAT.
    pub hidden_dim: usize,
    pub num_classes: usize,
    /// GAT only; 1 for GCN.
    pub heads_layer1: usize,
    pub dropout_rate: f64,
    pub leaky_slope: f64,
    pub activation: HiddenActivation,
    pub seed: u64,
}

impl ModelConfig {
    pub fn gcn(in_dim: usize, num_classes: usize) -> Self {
        Self {
            arch: Arch::Gcn,
            in_dim,
            hidden_dim: 16,
            num_classes,
            heads_layer1: 1,
            dropout_rate: 0.5,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            activation: HiddenActivation::Relu,
            seed: 0,
        }
    }

    pub fn gat(in_dim: usize, num_classes: usize) -> Self {
        Self { arch: Arch::Gat, hidden_dim: 8, heads_layer1: 8, ..Self::gcn(in_dim, num_classes) }
    }

    pub fn for_arch(arch: Arch, in_dim: usize, num_classes: usize) -> Self {
        match arch {
            Arch::Gcn => Self::gcn(in_dim, num_classes),
            Arch::Gat => Self::gat(in_dim, num_classes),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Width of the layer-1 representation exposed as embeddings.
    pub fn embedding_dim(&self) -> usize {
        match self.arch {
            Arch::Gcn => self.hidden_dim,
            Arch::Gat => self.hidden_dim * self.heads_layer1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads_layer1 == 0 {
            return Err(Error::InvalidConfig("heads_layer1 must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidRate { rate: self.dropout_rate });
        }
        if self.in_dim == 0 || self.hidden_dim == 0 || self.num_classes == 0 {
            return Err(Error::InvalidConfig("dimensions must be positive".into()));
        }
        if self.arch == Arch::Gcn && self.heads_layer1 != 1 {
            return Err(Error::InvalidConfig("GCN has a single head".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams<T> {
    Gcn(GcnParams<T>),
    Gat(GatParams<T>),
}

impl<T: Scalar> ModelParams<T> {
    pub fn arch(&self) -> Arch {
        match self {
            ModelParams::Gcn(_) => Arch::Gcn,
            ModelParams::Gat(_) => Arch::Gat,
        }
    }

    /// Parameter tensors in serialization order.
    pub fn tensors(&self) -> Vec<&Matrix<T>> {
        match self {
            ModelParams::Gcn(p) => vec![&p.w1, &p.b1, &p.w2, &p.b2],
            ModelParams::Gat(p) => {
                let mut v = p.layer1.tensors();
                v.extend(p.layer2.tensors());
                v
            }
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix<T>> {
        match self {
            ModelParams::Gcn(p) => vec![&mut p.w1, &mut p.b1, &mut p.w2, &mut p.b2],
            ModelParams::Gat(p) => {
                let mut v = p.layer1.tensors_mut();
                v.extend(p.layer2.tensors_mut());
                v
            }
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.data_mut().iter_mut().for_each(|x| *x = T::zero());
        }
        z
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.data().len()).sum()
    }

    /// All parameters concatenated in tensor order.
    pub fn flatten(&self) -> Vec<T> {
        self.tensors().iter().flat_map(|t| t.data().iter().copied()).collect()
    }

    /// Inverse of [`ModelParams::flatten`].
    pub fn assign_flat(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.num_scalars() {
            return Err(Error::ShapeMismatch(format!("{} values for {} parameters", flat.len(), self.num_scalars())));
        }
        let mut at = 0;
        for t in self.tensors_mut() {
            let n = t.data().len();
            t.data_mut().copy_from_slice(&flat[at..at + n]);
            at += n;
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        match self {
            ModelParams::Gcn(p) => ModelParams::Gcn(p.cast()),
            ModelParams::Gat(p) => ModelParams::Gat(p.cast()),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }
}

/// Glorot-uniform weights and zero biases, reproducible from `config.seed`.
pub fn init_params<T: Scalar>(config: &ModelConfig) -> Result<ModelParams<T>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut glorot = |rows: usize, cols: usize| -> Matrix<T> {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite glorot bound");
        let data = (0..rows * cols).map(|_| T::of(dist.sample(&mut rng))).collect();
        Matrix::from_vec(rows, cols, data).expect("shape")
    };
    let c = config;
    Ok(match c.arch {
        Arch::Gcn => ModelParams::Gcn(GcnParams {
            w1: glorot(c.in_dim, c.hidden_dim),
            b1: Matrix::zeros(1, c.hidden_dim),
            w2: glorot(c.hidden_dim, c.num_classes),
            b2: Matrix::zeros(1, c.num_classes),
        }),
        Arch::Gat => {
            let width = c.hidden_dim * c.heads_layer1;
            let layer1 = GatLayerParams {
                heads: c.heads_layer1,
                weight: glorot(c.in_dim, width),
                att_src: glorot(c.heads_layer1, c.hidden_dim),
                att_dst: glorot(c.heads_layer1, c.hidden_dim),
                bias: Matrix::zeros(1, width),
            };
            let layer2 = GatLayerParams {
                heads: 1,
                weight: glorot(width, c.num_classes),
                att_src: glorot(1, c.num_classes),
                att_dst: glorot(1, c.num_classes),
                bias: Matrix::zeros(1, c.num_classes),
            };
            ModelParams::Gat(GatParams { layer1, layer2 })
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active, masks drawn from `seed`.
    Train { seed: u64 },
    Eval,
}

/// Everything one forward pass reads.
#[derive(Debug, Clone, Copy)]
pub struct GraphInput<'a, T> {
    pub features: &'a Matrix<T>,
    pub adjacency: &'a SparseAdjacency<T>,
    /// Per directed edge of `adjacency`; self-loops are never scaled.
    pub edge_weights: Option<&'a [T]>,
    /// Per input feature column.
    pub feature_mask: Option<&'a [T]>,
}

impl<'a, T: Scalar> GraphInput<'a, T> {
    pub fn new(features: &'a Matrix<T>, adjacency: &'a SparseAdjacency<T>) -> Self {
        Self { features, adjacency, edge_weights: None, feature_mask: None }
    }

    fn check(&self, in_dim: usize) -> Result<()> {
        if self.features.rows() != self.adjacency.num_nodes() {
            return Err(Error::ShapeMismatch(format!(
                "{} feature rows for {} nodes",
                self.features.rows(),
                self.adjacency.num_nodes()
            )));
        }
        if self.features.cols() != in_dim {
            return Err(Error::ShapeMismatch(format!("{} feature columns, model expects {in_dim}", self.features.cols())));
        }
        self.adjacency.check_weights(self.edge_weights)?;
        if let Some(f) = self.feature_mask {
            if f.len() != in_dim {
                return Err(Error::ShapeMismatch(format!("{} feature-mask entries for {in_dim} features", f.len())));
            }
        }
        Ok(())
    }
}

/// Attention coefficients aligned with adjacency entries.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMaps<T> {
    pub heads: usize,
    /// `nnz × heads`, entry-major.
    pub layer1: Vec<T>,
    /// `nnz`, single output head.
    pub layer2: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult<T> {
    pub log_probs: Matrix<T>,
    pub predicted: Vec<usize>,
    /// Layer-1 post-activation representations.
    pub embeddings: Matrix<T>,
    pub attention: Option<AttentionMaps<T>>,
}

#[derive(Debug, Clone)]
pub enum ForwardCache<T> {
    Gcn(GcnCache<T>),
    Gat(GatCache<T>),
}

#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub params: ModelParams<T>,
    /// Present when the input carried edge weights.
    pub edge_weights: Option<Vec<T>>,
    /// Present when the input carried a feature mask.
    pub feature_mask: Option<Vec<T>>,
}

/// A configured model with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub params: ModelParams<T>,
}

impl<T: Scalar> Model<T> {
    pub fn new(config: ModelConfig, params: ModelParams<T>) -> Result<Self> {
        config.validate()?;
        if params.arch() != config.arch {
            return Err(Error::ArchMismatch { expected: config.arch.to_string(), found: params.arch().to_string() });
        }
        let probe = init_params::<T>(&config)?;
        for (k, (a, b)) in probe.tensors().iter().zip(params.tensors()).enumerate() {
            if a.shape() != b.shape() {
                return Err(Error::ShapeMismatch(format!("tensor {k}: expected {:?}, got {:?}", a.shape(), b.shape())));
            }
        }
        Ok(Self { config, params })
    }

    pub fn init(config: ModelConfig) -> Result<Self> {
        let params = init_params(&config)?;
        Ok(Self { config, params })
    }

    pub fn arch(&self) -> Arch {
        self.config.arch
    }

    pub fn forward(&self, input: &GraphInput<'_, T>, mode: Mode) -> Result<InferenceResult<T>> {
        Ok(self.forward_cached(input, mode)?.0)
    }

    pub fn forward_cached(&self, input: &GraphInput<'_, T>, mode: Mode) -> Result<(InferenceResult<T>, ForwardCache<T>)> {
        input.check(self.config.in_dim)?;
        match &self.params {
            ModelParams::Gcn(p) => {
                let (r, c) = gcn::forward_cached(p, &self.config, input, mode)?;
                Ok((r, ForwardCache::Gcn(c)))
            }
            ModelParams::Gat(p) => {
                let (r, c) = gat::forward_cached(p, &self.config, input, mode)?;
                Ok((r, ForwardCache::Gat(c)))
            }
        }
    }

    /// Backpropagates `d_log_probs` (gradient of the loss with respect to the
    /// log-probabilities) through the cached forward pass.
    pub fn backward(&self, input: &GraphInput<'_, T>, cache: &ForwardCache<T>, d_log_probs: &Matrix<T>) -> Result<Gradients<T>> {
        match (&self.params, cache) {
            (ModelParams::Gcn(p), ForwardCache::Gcn(c)) => gcn::backward(p, input, c, d_log_probs),
            (ModelParams::Gat(p), ForwardCache::Gat(c)) => gat::backward(p, &self.config, input, c, d_log_probs),
            _ => Err(Error::ArchMismatch { expected: self.arch().to_string(), found: "cache of other arch".into() }),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model { config: self.config.clone(), params: self.params.cast() }
    }
}

/// Mean negative log-likelihood over `nodes` and its gradient with respect
/// to the log-probabilities.
pub fn nll_loss<T: Scalar>(log_probs: &Matrix<T>, labels: &[u16], nodes: &[usize]) -> (f64, Matrix<T>) {
    let mut grad = Matrix::zeros(log_probs.rows(), log_probs.cols());
    if nodes.is_empty() {
        return (0.0, grad);
    }
    let scale = 1.0 / nodes.len() as f64;
    let mut loss = 0.0;
    for &i in nodes {
        let y = labels[i] as usize;
        loss -= log_probs.get(i, y).as_f64();
        grad.set(i, y, T::of(-scale));
    }
    (loss * scale, grad)
}

/// Gradient of row-wise log-softmax: `dz = g − softmax · rowsum(g)`.
pub(crate) fn log_softmax_backward<T: Scalar>(log_probs: &Matrix<T>, g: &Matrix<T>) -> Matrix<T> {
    let mut dz = Matrix::zeros(g.rows(), g.cols());
    for i in 0..g.rows() {
        let s: f64 = g.row(i).iter().map(|x| x.as_f64()).sum();
        if s == 0.0 && g.row(i).iter().all(|&x| x == T::zero()) {
            continue;
        }
        for (j, o) in dz.row_mut(i).iter_mut().enumerate() {
            *o = T::of(g.get(i, j).as_f64() - log_probs.get(i, j).as_f64().exp() * s);
        }
    }
    dz
}
