use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::subgraph::extract_computation_subgraph;
use crate::explain::top_k_summary;
use crate::models::{GraphInput, Mode, Model};
use crate::numerics::adam::{adam_step, AdamConfig, OptimizerState};
use crate::numerics::matrix::Matrix;
use crate::numerics::ops::{sigmoid, softplus};
use crate::numerics::sparse::SparseAdjacency;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub edge_size_coeff: f64,
    pub edge_entropy_coeff: f64,
    pub feat_size_coeff: f64,
    pub feat_entropy_coeff: f64,
    pub top_k_edges: usize,
    pub top_k_features: usize,
    pub seed: u64,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            lr: 0.01,
            edge_size_coeff: 0.005,
            edge_entropy_coeff: 1.0,
            feat_size_coeff: 1.0,
            feat_entropy_coeff: 0.1,
            top_k_edges: 10,
            top_k_features: 10,
            seed: 0,
        }
    }
}

impl ExplainConfig {
    pub fn validate(&self) -> Result<()> {
        let coeffs = [self.edge_size_coeff, self.edge_entropy_coeff, self.feat_size_coeff, self.feat_entropy_coeff];
        if coeffs.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
            return Err(Error::InvalidConfig("explainer coefficients must be finite and >= 0".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("explainer learning rate must be positive, got {}", self.lr)));
        }
        if self.top_k_edges == 0 || self.top_k_features == 0 {
            return Err(Error::InvalidConfig("top-k must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainedEdge {
    pub u: usize,
    pub v: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub index: usize,
    pub name: Option<String>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub center: usize,
    /// Class the unmasked model predicts for `center`.
    pub predicted_class: usize,
    pub subgraph_nodes: Vec<usize>,
    /// Undirected `(u, v)` global pairs with `u < v`, aligned with
    /// `edge_mask`. One mask value gates both directions of an edge. Only
    /// edges touching the closed neighborhood of `center` are listed; the
    /// rest of the computation subgraph cannot affect its prediction.
    pub edges: Vec<(usize, usize)>,
    pub edge_mask: Vec<f64>,
    pub feature_mask: Vec<f64>,
    pub top_edges: Vec<ExplainedEdge>,
    pub top_features: Vec<RankedFeature>,
    /// Loss before each update, then once more after the last one.
    pub loss_trace: Vec<f64>,
}

/// Objective terms at one point of mask-logit space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplainerLoss {
    pub total: f64,
    pub prediction: f64,
    pub edge_size: f64,
    pub edge_entropy: f64,
    pub feat_size: f64,
    pub feat_entropy: f64,
}

/// Binary entropy of `σ(m)` and its derivative with respect to `m`.
fn entropy_of_logit(m: f64) -> (f64, f64) {
    let p = sigmoid(m);
    (p * softplus(-m) + (1.0 - p) * softplus(m), -m * p * (1.0 - p))
}

/// Groups directed edges into undirected ones. Returns the undirected
/// pairs in ascending order and, per directed edge, its group index.
pub fn undirected_groups(directed: &[(usize, usize)]) -> (Vec<(usize, usize)>, Vec<usize>) {
    let mut pairs: Vec<(usize, usize)> = directed.iter().map(|&(s, d)| (s.min(d), s.max(d))).collect();
    pairs.sort_unstable();
    pairs.dedup();
    let group = directed
        .iter()
        .map(|&(s, d)| pairs.binary_search(&(s.min(d), s.max(d))).expect("pair was inserted"))
        .collect();
    (pairs, group)
}

/// Group index of a directed edge that carries no mask (weight fixed at 1).
pub const UNMASKED: usize = usize::MAX;

/// As [`undirected_groups`], keeping only edges that can influence a
/// two-layer output at `center`: those with an endpoint in the closed
/// neighborhood of `center`. An edge between two nodes at distance 2 only
/// feeds layer-1 states that never reach `center`; it maps to [`UNMASKED`].
pub fn receptive_groups(directed: &[(usize, usize)], center: usize) -> (Vec<(usize, usize)>, Vec<usize>) {
    let near: BTreeSet<usize> =
        directed.iter().filter_map(|&(s, d)| if d == center { Some(s) } else { None }).chain([center]).collect();
    let relevant = |&(s, d): &(usize, usize)| near.contains(&s) || near.contains(&d);
    let kept: Vec<(usize, usize)> = directed.iter().copied().filter(relevant).collect();
    let (pairs, _) = undirected_groups(&kept);
    let group = directed
        .iter()
        .map(|e| if relevant(e) { pairs.binary_search(&(e.0.min(e.1), e.0.max(e.1))).expect("kept pair") } else { UNMASKED })
        .collect();
    (pairs, group)
}

/// Eval-mode log-probabilities of `center` under sigmoid-space masks.
pub fn masked_log_probs<T: Scalar>(
    model: &Model<T>,
    features: &Matrix<T>,
    adj: &SparseAdjacency<T>,
    center: usize,
    edge_mask: &[f64],
    feature_mask: &[f64],
) -> Result<Vec<f64>> {
    let ew: Vec<T> = edge_mask.iter().map(|&v| T::of(v)).collect();
    let fm: Vec<T> = feature_mask.iter().map(|&v| T::of(v)).collect();
    let input = GraphInput { features, adjacency: adj, edge_weights: Some(&ew), feature_mask: Some(&fm) };
    let out = model.forward(&input, Mode::Eval)?;
    Ok(out.log_probs.row(center).iter().map(|x| x.as_f64()).collect())
}

/// Explainer objective and its gradient with respect to the edge and
/// feature mask logits. Directed edge `k` of `adj` is gated by
/// `edge_logits[edge_group[k]]`, or not at all when the group is
/// [`UNMASKED`].
#[allow(clippy::too_many_arguments)]
pub fn explainer_loss<T: Scalar>(
    model: &Model<T>,
    features: &Matrix<T>,
    adj: &SparseAdjacency<T>,
    edge_group: &[usize],
    center: usize,
    target: usize,
    edge_logits: &[f64],
    feat_logits: &[f64],
    cfg: &ExplainConfig,
) -> Result<(ExplainerLoss, Vec<f64>, Vec<f64>)> {
    if edge_group.len() != adj.num_edges() || edge_group.iter().any(|&g| g >= edge_logits.len() && g != UNMASKED) {
        return Err(Error::ShapeMismatch(format!(
            "edge grouping covers {} of {} edges into {} logits",
            edge_group.len(),
            adj.num_edges(),
            edge_logits.len()
        )));
    }
    let edge_p: Vec<f64> = edge_logits.iter().map(|&m| sigmoid(m)).collect();
    let feat_p: Vec<f64> = feat_logits.iter().map(|&m| sigmoid(m)).collect();
    let ew: Vec<T> = edge_group.iter().map(|&g| if g == UNMASKED { T::one() } else { T::of(edge_p[g]) }).collect();
    let fm: Vec<T> = feat_p.iter().map(|&v| T::of(v)).collect();
    let input = GraphInput { features, adjacency: adj, edge_weights: Some(&ew), feature_mask: Some(&fm) };
    let (out, cache) = model.forward_cached(&input, Mode::Eval)?;
    let prediction = -out.log_probs.get(center, target).as_f64();

    let mut dlp = Matrix::zeros(out.log_probs.rows(), out.log_probs.cols());
    dlp.set(center, target, -T::one());
    let grads = model.backward(&input, &cache, &dlp)?;
    let mut d_edge_p = vec![0.0; edge_logits.len()];
    for (&group, g) in edge_group.iter().zip(grads.edge_weights.expect("edge weights were supplied")) {
        if group != UNMASKED {
            d_edge_p[group] += g.as_f64();
        }
    }
    let d_feat_p = grads.feature_mask.expect("feature mask was supplied");

    let ne = edge_logits.len();
    let nf = feat_logits.len();
    let mut loss = ExplainerLoss { total: 0.0, prediction, edge_size: 0.0, edge_entropy: 0.0, feat_size: 0.0, feat_entropy: 0.0 };
    let mut d_edge = vec![0.0; ne];
    for k in 0..ne {
        let p = edge_p[k];
        let dp_dm = p * (1.0 - p);
        let (h, dh) = entropy_of_logit(edge_logits[k]);
        loss.edge_size += cfg.edge_size_coeff * p;
        loss.edge_entropy += cfg.edge_entropy_coeff * h / ne as f64;
        d_edge[k] = (d_edge_p[k] + cfg.edge_size_coeff) * dp_dm + cfg.edge_entropy_coeff * dh / ne as f64;
    }
    let mut d_feat = vec![0.0; nf];
    for k in 0..nf {
        let p = feat_p[k];
        let dp_dm = p * (1.0 - p);
        let (h, dh) = entropy_of_logit(feat_logits[k]);
        loss.feat_size += cfg.feat_size_coeff * p / nf as f64;
        loss.feat_entropy += cfg.feat_entropy_coeff * h / nf as f64;
        d_feat[k] = (d_feat_p[k].as_f64() + cfg.feat_size_coeff / nf as f64) * dp_dm + cfg.feat_entropy_coeff * dh / nf as f64;
    }
    loss.total = loss.prediction + loss.edge_size + loss.edge_entropy + loss.feat_size + loss.feat_entropy;
    Ok((loss, d_edge, d_feat))
}

/// GNNExplainer for `center` on the graph `(features, adj)`, which must be
/// the full graph the model was run on.
pub fn run_gnn_explainer<T: Scalar>(
    model: &Model<T>,
    features: &Matrix<T>,
    adj: &SparseAdjacency<T>,
    center: usize,
    cfg: &ExplainConfig,
    feature_names: Option<&[String]>,
) -> Result<Explanation> {
    run_gnn_explainer_observed(model, features, adj, center, cfg, feature_names, &mut |_, _| true)
}

/// As [`run_gnn_explainer`]; `observer(epoch, epochs)` returning `false`
/// cancels the run.
#[allow(clippy::too_many_arguments)]
pub fn run_gnn_explainer_observed<T: Scalar>(
    model: &Model<T>,
    features: &Matrix<T>,
    adj: &SparseAdjacency<T>,
    center: usize,
    cfg: &ExplainConfig,
    feature_names: Option<&[String]>,
    observer: &mut dyn FnMut(usize, usize) -> bool,
) -> Result<Explanation> {
    cfg.validate()?;
    if center >= adj.num_nodes() || features.rows() != adj.num_nodes() {
        return Err(Error::InvalidNode { node: center });
    }
    let (sub, sub_adj) = extract_computation_subgraph(adj, center, 2)?;
    let sub_x = features.select_rows(&sub.nodes);
    let c = sub.center_local();
    let base = model.forward(&GraphInput::new(&sub_x, &sub_adj), Mode::Eval)?;
    let target = base.predicted[c];

    let (pairs, group) = receptive_groups(&sub.edges, center);
    let ne = pairs.len();
    let nf = features.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = Normal::new(0.0, 0.1).expect("valid normal");
    let mut edge_logits: Vec<f64> = (0..ne).map(|_| init.sample(&mut rng)).collect();
    let mut feat_logits: Vec<f64> = (0..nf).map(|_| init.sample(&mut rng)).collect();
    let adam = AdamConfig { lr: cfg.lr, weight_decay: 0.0, ..AdamConfig::default() };
    let mut opt = OptimizerState::<f64>::new(adam, &[ne, nf]);

    let mut loss_trace = Vec::with_capacity(cfg.epochs + 1);
    for epoch in 0..=cfg.epochs {
        let (loss, de, df) = explainer_loss(model, &sub_x, &sub_adj, &group, c, target, &edge_logits, &feat_logits, cfg)?;
        if !loss.total.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        loss_trace.push(loss.total);
        if epoch == cfg.epochs {
            break;
        }
        adam_step(&mut [&mut edge_logits[..], &mut feat_logits[..]], &[&de, &df], &mut opt)?;
        if !observer(epoch + 1, cfg.epochs) {
            return Err(Error::Cancelled);
        }
    }

    let edge_mask: Vec<f64> = edge_logits.iter().map(|&m| sigmoid(m)).collect();
    let feature_mask: Vec<f64> = feat_logits.iter().map(|&m| sigmoid(m)).collect();
    let top_edges = top_k_summary(&edge_mask, cfg.top_k_edges)
        .into_iter()
        .map(|(k, score)| ExplainedEdge { u: pairs[k].0, v: pairs[k].1, score })
        .collect();
    let top_features = top_k_summary(&feature_mask, cfg.top_k_features)
        .into_iter()
        .map(|(index, score)| RankedFeature { index, name: feature_names.and_then(|n| n.get(index).cloned()), score })
        .collect();
    Ok(Explanation {
        center,
        predicted_class: target,
        subgraph_nodes: sub.nodes,
        edges: pairs,
        edge_mask,
        feature_mask,
        top_edges,
        top_features,
        loss_trace,
    })
}
