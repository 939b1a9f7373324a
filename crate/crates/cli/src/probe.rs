//! What-if probes: scripted edit sequences and the single-edge-flip search.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use gnnx_core::dataset::GraphDataset;
use gnnx_core::explain::extract_computation_subgraph;
use gnnx_core::numerics::build_normalized_adjacency;
use gnnx_core::session::{EditOp, PredictionChange, Session, WorkingGraph};
use gnnx_core::{Arch, GraphInput, Mode, Model, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchDirective {
    FindSingleEdgeFlip,
}

/// A probe: either an ordered edit list or a search. Relative paths are
/// resolved against the script's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeScript {
    pub dataset: PathBuf,
    pub model: PathBuf,
    #[serde(default)]
    pub ops: Vec<EditOp>,
    #[serde(default)]
    pub search: Option<SearchDirective>,
    /// Nodes whose prediction is recorded after every edit.
    #[serde(default)]
    pub watch: Vec<usize>,
    pub report: PathBuf,
}

impl ProbeScript {
    pub fn resolve_paths(mut self, base: &Path) -> Self {
        for p in [&mut self.dataset, &mut self.model, &mut self.report] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WatchedNode {
    pub id: usize,
    pub predicted_class: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlipHit {
    pub node: usize,
    pub true_class: usize,
    pub old_prediction: usize,
    pub new_prediction: usize,
    /// Canonical `(u, v)`, `u < v`.
    pub removed_edge: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlipScan {
    /// Labeled nodes the unedited graph misclassifies.
    pub misclassified: usize,
    /// Candidate removals evaluated up to and including the hit, in scan
    /// order (all of them when nothing flips).
    pub edges_tried: usize,
    pub hit: Option<FlipHit>,
}

/// One line of a probe report. Reports carry no timestamps, so the same
/// script and weights reproduce the file byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum ProbeLine {
    Probe { dataset: String, arch: Arch, num_ops: usize, search: Option<SearchDirective> },
    Edit { step: usize, op: EditOp, graph_version: u64, changed_predictions: Vec<PredictionChange>, watched: Vec<WatchedNode> },
    Flip { hit: FlipHit, true_class_name: String, old_class_name: String, new_class_name: String },
    ScanDone { misclassified: usize, edges_tried: usize, found: bool },
}

fn watched(session: &Session, watch: &[usize]) -> Vec<WatchedNode> {
    let snap = session.snapshot();
    watch.iter().map(|&id| WatchedNode { id, predicted_class: snap.predicted(id) }).collect()
}

/// Validates the whole edit list against a scratch copy before touching the
/// session, so a bad op at step k fails before any report is written.
pub fn validate_ops(ds: &GraphDataset, ops: &[EditOp]) -> Result<()> {
    let mut scratch = WorkingGraph::from_dataset(ds);
    ops.iter().try_for_each(|op| scratch.apply(op))
}

/// Runs a probe script on an already loaded dataset and model.
pub fn run_probe(script: &ProbeScript, ds: Arc<GraphDataset>, model: Arc<Model<f32>>) -> Result<Vec<ProbeLine>> {
    validate_ops(&ds, &script.ops)?;
    let mut lines = vec![ProbeLine::Probe {
        dataset: ds.name.clone(),
        arch: model.arch(),
        num_ops: script.ops.len(),
        search: script.search,
    }];
    let mut session = Session::create("probe", Arc::clone(&ds), Arc::clone(&model))?;
    for (step, &op) in script.ops.iter().enumerate() {
        let out = session.apply_edit(op)?;
        lines.push(ProbeLine::Edit {
            step,
            op,
            graph_version: out.graph_version,
            changed_predictions: out.changed_predictions,
            watched: watched(&session, &script.watch),
        });
    }
    if script.search == Some(SearchDirective::FindSingleEdgeFlip) {
        if !script.ops.is_empty() {
            return Err(gnnx_core::Error::InvalidConfig("find-single-edge-flip runs on the unedited graph; drop the ops".into()));
        }
        let scan = find_single_edge_flip(&ds, &model)?;
        if let Some(hit) = &scan.hit {
            lines.push(ProbeLine::Flip {
                hit: hit.clone(),
                true_class_name: ds.class_name(hit.true_class).to_string(),
                old_class_name: ds.class_name(hit.old_prediction).to_string(),
                new_class_name: ds.class_name(hit.new_prediction).to_string(),
            });
        }
        lines.push(ProbeLine::ScanDone { misclassified: scan.misclassified, edges_tried: scan.edges_tried, found: scan.hit.is_some() });
    }
    Ok(lines)
}

/// Prediction for `node` after deleting `edge` from the graph.
fn prediction_without(ds: &GraphDataset, model: &Model<f32>, node: usize, edge: (usize, usize)) -> Result<usize> {
    let kept: Vec<(usize, usize)> = ds.edges.iter().copied().filter(|&e| e != edge).collect();
    let adj = build_normalized_adjacency::<f32>(&kept, ds.num_nodes())?;
    let (sub, sub_adj) = extract_computation_subgraph(&adj, node, 2)?;
    let x = ds.features.select_rows(&sub.nodes);
    let out = model.forward(&GraphInput::new(&x, &sub_adj), Mode::Eval)?;
    Ok(out.predicted[sub.center_local()])
}

/// Scans labeled, misclassified nodes in ascending id and, for each, its
/// incident edges in ascending neighbor id; returns the first removal that
/// turns the prediction into the true class. Nodes are evaluated in
/// parallel but the reported hit is always the first in scan order.
pub fn find_single_edge_flip(ds: &GraphDataset, model: &Model<f32>) -> Result<FlipScan> {
    let full = gnnx_core::training::GraphTensors::<f32>::from_dataset(ds)?;
    let base = model.forward(&full.input(), Mode::Eval)?;
    let neighbors = ds.neighbor_lists();
    let candidates: Vec<(usize, usize, usize)> = (0..ds.num_nodes())
        .filter_map(|i| ds.label(i).filter(|&y| y != base.predicted[i]).map(|y| (i, y, base.predicted[i])))
        .collect();

    let first = candidates
        .par_iter()
        .enumerate()
        .map(|(k, &(node, truth, old))| -> Result<Option<(usize, usize, FlipHit)>> {
            for (pos, &j) in neighbors[node].iter().enumerate() {
                let edge = (node.min(j), node.max(j));
                let new = prediction_without(ds, model, node, edge)?;
                if new == truth {
                    let hit = FlipHit { node, true_class: truth, old_prediction: old, new_prediction: new, removed_edge: edge };
                    return Ok(Some((k, pos, hit)));
                }
            }
            Ok(None)
        })
        .find_map_first(|r| match r {
            Ok(None) => None,
            other => Some(other),
        })
        .transpose()?
        .flatten();

    let degree = |k: usize| neighbors[candidates[k].0].len();
    Ok(match first {
        Some((k, pos, hit)) => FlipScan { misclassified: candidates.len(), edges_tried: (0..k).map(degree).sum::<usize>() + pos + 1, hit: Some(hit) },
        None => FlipScan { misclassified: candidates.len(), edges_tried: (0..candidates.len()).map(degree).sum(), hit: None },
    })
}
