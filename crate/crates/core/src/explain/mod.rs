//! Prediction explanations: GNNExplainer masks over a node's computation
//! subgraph and GAT attention summaries.

mod attention;
mod gnnexplainer;
mod subgraph;

pub use attention::{extract_attention, AttentionEntry, AttentionSummary};
pub use gnnexplainer::{
    explainer_loss, masked_log_probs, receptive_groups, undirected_groups, UNMASKED, run_gnn_explainer, run_gnn_explainer_observed, ExplainConfig, ExplainerLoss,
    Explanation, ExplainedEdge, RankedFeature,
};
pub use subgraph::{extract_computation_subgraph, ComputationSubgraph};

/// Indices of the `k` largest scores, descending; equal scores keep
/// ascending index order.
pub fn top_k_summary(scores: &[f64], k: usize) -> Vec<(usize, f64)> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    // stable sort keeps ascending index among ties
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx.truncate(k);
    idx.into_iter().map(|i| (i, scores[i])).collect()
}

/// Shannon entropy (nats) of the top-`k` scores normalized to sum to one.
/// Lower values mean the explanation concentrates on fewer edges.
pub fn normalized_top_k_entropy(scores: &[f64], k: usize) -> f64 {
    let top = top_k_summary(scores, k);
    let total: f64 = top.iter().map(|(_, s)| s).sum();
    if total <= 0.0 {
        return 0.0;
    }
    top.iter()
        .map(|(_, s)| s / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum()
}
