//! Editable what-if sessions over a pristine dataset and a trained model.
//!
//! Removed nodes keep their id and feature row as isolated tombstones, so
//! ids are never reused and replaying the edit log is exact.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::GraphDataset;
use crate::error::{Error, Result};
use crate::explain::{run_gnn_explainer, ExplainConfig, Explanation};
use crate::models::{GraphInput, InferenceResult, Mode, Model};
use crate::numerics::matrix::Matrix;
use crate::numerics::sparse::{build_normalized_adjacency, SparseAdjacency};
use crate::projection::{ProjectionMethod, ProjectionResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "node", rename_all = "snake_case")]
pub enum FeatureSource {
    Zeros,
    CopyOf(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum EditOp {
    AddNode { feature_source: FeatureSource },
    RemoveNode { id: usize },
    AddEdge { u: usize, v: usize },
    RemoveEdge { u: usize, v: usize },
}

/// Features and structure of a session's graph.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkingGraph {
    pub features: Matrix<f32>,
    /// Canonical `(u, v)`, `u < v`.
    pub edges: BTreeSet<(usize, usize)>,
    pub alive: Vec<bool>,
}

impl WorkingGraph {
    pub fn from_dataset(ds: &GraphDataset) -> Self {
        Self { features: ds.features.clone(), edges: ds.edges.iter().copied().collect(), alive: vec![true; ds.num_nodes()] }
    }

    pub fn num_slots(&self) -> usize {
        self.alive.len()
    }

    pub fn exists(&self, node: usize) -> bool {
        self.alive.get(node).copied().unwrap_or(false)
    }

    pub fn neighbors(&self, node: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.edges.iter().filter_map(|&(u, v)| if u == node { Some(v) } else if v == node { Some(u) } else { None }).collect();
        out.sort_unstable();
        out
    }

    fn check(&self, op: &EditOp) -> Result<()> {
        let need = |n: usize| if self.exists(n) { Ok(()) } else { Err(Error::MissingNode { node: n }) };
        match *op {
            EditOp::AddNode { feature_source: FeatureSource::CopyOf(t) } => need(t),
            EditOp::AddNode { feature_source: FeatureSource::Zeros } => Ok(()),
            EditOp::RemoveNode { id } => need(id),
            EditOp::AddEdge { u, v } => {
                if u == v {
                    return Err(Error::SelfLoopRejected { node: u });
                }
                need(u)?;
                need(v)?;
                if self.edges.contains(&(u.min(v), u.max(v))) {
                    return Err(Error::DuplicateEdge { u, v });
                }
                Ok(())
            }
            EditOp::RemoveEdge { u, v } => {
                if self.edges.contains(&(u.min(v), u.max(v))) {
                    Ok(())
                } else {
                    Err(Error::MissingEdge { u, v })
                }
            }
        }
    }

    /// Validates and applies `op`; on error the graph is unchanged.
    pub fn apply(&mut self, op: &EditOp) -> Result<()> {
        self.check(op)?;
        match *op {
            EditOp::AddNode { feature_source } => {
                let row = match feature_source {
                    FeatureSource::Zeros => vec![0.0; self.features.cols()],
                    FeatureSource::CopyOf(t) => self.features.row(t).to_vec(),
                };
                let (n, f) = self.features.shape();
                let mut data = std::mem::replace(&mut self.features, Matrix::zeros(0, 0)).into_vec();
                data.extend(row);
                self.features = Matrix::from_vec(n + 1, f, data)?;
                self.alive.push(true);
            }
            EditOp::RemoveNode { id } => {
                self.edges.retain(|&(u, v)| u != id && v != id);
                self.alive[id] = false;
            }
            EditOp::AddEdge { u, v } => {
                self.edges.insert((u.min(v), u.max(v)));
            }
            EditOp::RemoveEdge { u, v } => {
                self.edges.remove(&(u.min(v), u.max(v)));
            }
        }
        Ok(())
    }
}

/// Applies `log` in order to the pristine graph of `ds`.
pub fn replay(ds: &GraphDataset, log: &[EditOp]) -> Result<WorkingGraph> {
    let mut g = WorkingGraph::from_dataset(ds);
    for op in log {
        g.apply(op)?;
    }
    Ok(g)
}

/// Immutable view of one graph version, shareable with background jobs.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub version: u64,
    pub features: Matrix<f32>,
    pub adjacency: SparseAdjacency<f32>,
    pub alive: Vec<bool>,
    pub inference: InferenceResult<f32>,
}

impl Snapshot {
    pub fn predicted(&self, node: usize) -> Option<usize> {
        self.alive.get(node).copied().unwrap_or(false).then(|| self.inference.predicted[node])
    }

    /// Ids of live nodes and their embedding rows, in id order.
    pub fn live_embeddings(&self) -> (Vec<usize>, Matrix<f32>) {
        let ids: Vec<usize> = (0..self.alive.len()).filter(|&i| self.alive[i]).collect();
        let rows = self.inference.embeddings.select_rows(&ids);
        (ids, rows)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionChange {
    pub id: usize,
    pub old: Option<usize>,
    pub new: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditOutcome {
    pub graph_version: u64,
    pub changed_predictions: Vec<PredictionChange>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborInfo {
    pub id: usize,
    pub true_class: Option<usize>,
    pub predicted_class: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborSummary {
    pub center: usize,
    pub neighbors: Vec<NeighborInfo>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Selection {
    Node { id: usize },
    Edge { u: usize, v: usize },
}

pub struct Session {
    pub id: String,
    dataset: Arc<GraphDataset>,
    model: Arc<Model<f32>>,
    graph: WorkingGraph,
    edit_log: Vec<EditOp>,
    snapshot: Arc<Snapshot>,
    explanations: HashMap<(u64, usize, String), Arc<Explanation>>,
    projections: HashMap<(u64, ProjectionMethod, String), Arc<ProjectionResult>>,
    pub selection: Option<Selection>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("id", &self.id)
            .field("dataset", &self.dataset.name)
            .field("arch", &self.model.arch())
            .field("graph_version", &self.snapshot.version)
            .field("edits", &self.edit_log.len())
            .finish()
    }
}

fn infer(model: &Model<f32>, graph: &WorkingGraph, version: u64) -> Result<Snapshot> {
    let edges: Vec<(usize, usize)> = graph.edges.iter().copied().collect();
    let adjacency = build_normalized_adjacency(&edges, graph.num_slots())?;
    let inference = model.forward(&GraphInput::new(&graph.features, &adjacency), Mode::Eval)?;
    Ok(Snapshot { version, features: graph.features.clone(), adjacency, alive: graph.alive.clone(), inference })
}

impl Session {
    pub fn create(id: impl Into<String>, dataset: Arc<GraphDataset>, model: Arc<Model<f32>>) -> Result<Self> {
        if model.config.in_dim != dataset.num_features() {
            return Err(Error::DimensionMismatch { dataset: dataset.num_features(), model: model.config.in_dim });
        }
        if model.config.num_classes != dataset.num_classes {
            return Err(Error::InvalidConfig(format!(
                "model predicts {} classes, dataset has {}",
                model.config.num_classes, dataset.num_classes
            )));
        }
        let graph = WorkingGraph::from_dataset(&dataset);
        let snapshot = Arc::new(infer(&model, &graph, 0)?);
        Ok(Self {
            id: id.into(),
            dataset,
            model,
            graph,
            edit_log: Vec::new(),
            snapshot,
            explanations: HashMap::new(),
            projections: HashMap::new(),
            selection: None,
        })
    }

    pub fn dataset(&self) -> &Arc<GraphDataset> {
        &self.dataset
    }

    pub fn model(&self) -> &Arc<Model<f32>> {
        &self.model
    }

    pub fn graph(&self) -> &WorkingGraph {
        &self.graph
    }

    pub fn edit_log(&self) -> &[EditOp] {
        &self.edit_log
    }

    pub fn graph_version(&self) -> u64 {
        self.snapshot.version
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        Arc::clone(&self.snapshot)
    }

    pub fn inference(&self) -> &InferenceResult<f32> {
        &self.snapshot.inference
    }

    pub fn true_class(&self, node: usize) -> Option<usize> {
        if node < self.dataset.num_nodes() {
            self.dataset.label(node)
        } else {
            None
        }
    }

    fn advance(&mut self) -> Result<EditOutcome> {
        let old = Arc::clone(&self.snapshot);
        let next = infer(&self.model, &self.graph, old.version + 1)?;
        let slots = old.alive.len().max(next.alive.len());
        let changed_predictions = (0..slots)
            .filter_map(|id| {
                let (a, b) = (old.predicted(id), next.predicted(id));
                (a != b).then_some(PredictionChange { id, old: a, new: b })
            })
            .collect();
        self.snapshot = Arc::new(next);
        self.explanations.clear();
        self.projections.clear();
        Ok(EditOutcome { graph_version: self.snapshot.version, changed_predictions })
    }

    /// Applies one edit and re-infers. A rejected edit leaves the session
    /// untouched.
    pub fn apply_edit(&mut self, op: EditOp) -> Result<EditOutcome> {
        self.graph.apply(&op)?;
        self.edit_log.push(op);
        if let EditOp::RemoveNode { id } = op {
            if matches!(self.selection, Some(Selection::Node { id: s }) if s == id) {
                self.selection = None;
            }
        }
        self.advance()
    }

    /// Restores the pristine graph; the version still moves forward.
    pub fn reset(&mut self) -> Result<EditOutcome> {
        self.graph = WorkingGraph::from_dataset(&self.dataset);
        self.edit_log.clear();
        self.selection = None;
        self.advance()
    }

    pub fn neighbor_summary(&self, node: usize) -> Result<NeighborSummary> {
        if !self.graph.exists(node) {
            return Err(Error::MissingNode { node });
        }
        let neighbors = self
            .graph
            .neighbors(node)
            .into_iter()
            .map(|id| NeighborInfo { id, true_class: self.true_class(id), predicted_class: self.snapshot.inference.predicted[id] })
            .collect();
        Ok(NeighborSummary { center: node, neighbors })
    }

    pub fn cached_explanation(&self, version: u64, node: usize, cfg: &ExplainConfig) -> Option<Arc<Explanation>> {
        self.explanations.get(&(version, node, cache_key(cfg))).cloned()
    }

    /// Stores a result computed from `version`; ignored when the session has
    /// moved on.
    pub fn store_explanation(&mut self, version: u64, node: usize, cfg: &ExplainConfig, e: Arc<Explanation>) -> bool {
        if version != self.snapshot.version {
            return false;
        }
        self.explanations.insert((version, node, cache_key(cfg)), e);
        true
    }

    /// Explains `node` on the current graph, using the cache when possible.
    pub fn explain(&mut self, node: usize, cfg: &ExplainConfig) -> Result<Arc<Explanation>> {
        if !self.graph.exists(node) {
            return Err(Error::InvalidNode { node });
        }
        let v = self.snapshot.version;
        if let Some(e) = self.cached_explanation(v, node, cfg) {
            return Ok(e);
        }
        let s = &self.snapshot;
        let e = Arc::new(run_gnn_explainer(&self.model, &s.features, &s.adjacency, node, cfg, self.dataset.feature_names.as_deref())?);
        self.store_explanation(v, node, cfg, Arc::clone(&e));
        Ok(e)
    }

    pub fn cached_projection(&self, version: u64, method: ProjectionMethod, key: &str) -> Option<Arc<ProjectionResult>> {
        self.projections.get(&(version, method, key.to_string())).cloned()
    }

    pub fn store_projection(&mut self, version: u64, method: ProjectionMethod, key: &str, p: Arc<ProjectionResult>) -> bool {
        if version != self.snapshot.version {
            return false;
        }
        self.projections.insert((version, method, key.to_string()), p);
        true
    }
}

fn cache_key<T: Serialize>(cfg: &T) -> String {
    serde_json::to_string(cfg).expect("config serializes")
}
