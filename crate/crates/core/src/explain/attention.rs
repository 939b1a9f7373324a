use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::InferenceResult;
use crate::numerics::sparse::SparseAdjacency;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionEntry {
    pub neighbor: usize,
    /// Layer-1 coefficient per head.
    pub per_head: Vec<f64>,
    pub mean: f64,
    /// Coefficient of the single-head output layer.
    pub output_layer: f64,
}

/// GAT attention around one node, in both directions. Both lists include
/// the node's self-loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionSummary {
    pub center: usize,
    pub heads: usize,
    /// Attention the center assigns to each `j ∈ N(center) ∪ {center}`.
    pub assigns: Vec<AttentionEntry>,
    /// Attention each neighbor assigns to the center.
    pub receives: Vec<AttentionEntry>,
}

fn entry<T: Scalar>(neighbor: usize, e: usize, heads: usize, l1: &[T], l2: &[T]) -> AttentionEntry {
    let per_head: Vec<f64> = l1[e * heads..(e + 1) * heads].iter().map(|x| x.as_f64()).collect();
    let mean = per_head.iter().sum::<f64>() / heads as f64;
    AttentionEntry { neighbor, per_head, mean, output_layer: l2[e].as_f64() }
}

pub fn extract_attention<T: Scalar>(
    inference: &InferenceResult<T>,
    adj: &SparseAdjacency<T>,
    center: usize,
) -> Result<AttentionSummary> {
    let att = inference.attention.as_ref().ok_or(Error::ModelNotGat)?;
    if center >= adj.num_nodes() {
        return Err(Error::InvalidNode { node: center });
    }
    let heads = att.heads;
    let mut assigns = Vec::new();
    let mut receives = Vec::new();
    for e in adj.row_range(center) {
        let j = adj.col(e);
        assigns.push(entry(j, e, heads, &att.layer1, &att.layer2));
        // the reverse entry sits in row j, column center
        let back = if j == center { e } else { adj.find(j, center).expect("adjacency is symmetric") };
        receives.push(entry(j, back, heads, &att.layer1, &att.layer2));
    }
    Ok(AttentionSummary { center, heads, assigns, receives })
}
