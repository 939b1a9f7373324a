use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::sparse::SparseAdjacency;
use crate::scalar::Scalar;

/// The `hops`-hop neighborhood that determines a node's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputationSubgraph {
    pub center: usize,
    pub hops: usize,
    /// Global ids, ascending.
    pub nodes: Vec<usize>,
    /// Directed `(src, dst)` global pairs among `nodes`, grouped by
    /// ascending `dst`, then ascending `src`.
    pub edges: Vec<(usize, usize)>,
    /// Per entry of `edges`, the index of that directed edge in the parent
    /// adjacency.
    pub parent_edges: Vec<usize>,
}

impl ComputationSubgraph {
    /// Position of `center` in `nodes`.
    pub fn center_local(&self) -> usize {
        self.local(self.center).expect("center is in its own subgraph")
    }

    pub fn local(&self, global: usize) -> Option<usize> {
        self.nodes.binary_search(&global).ok()
    }
}

/// Breadth-first closure of `center` to `hops` hops, with the operator
/// restricted to the closure (entries keep full-graph normalization).
pub fn extract_computation_subgraph<T: Scalar>(
    adj: &SparseAdjacency<T>,
    center: usize,
    hops: usize,
) -> Result<(ComputationSubgraph, SparseAdjacency<T>)> {
    if center >= adj.num_nodes() {
        return Err(Error::InvalidNode { node: center });
    }
    let mut seen = BTreeSet::from([center]);
    let mut frontier = vec![center];
    for _ in 0..hops {
        let mut next = Vec::new();
        for &i in &frontier {
            for e in adj.row_range(i) {
                let j = adj.col(e);
                if seen.insert(j) {
                    next.push(j);
                }
            }
        }
        frontier = next;
    }
    let nodes: Vec<usize> = seen.into_iter().collect();
    let (sub, parent_edges) = adj.restrict(&nodes)?;
    let edges = sub.edges().iter().map(|&(s, d)| (nodes[s], nodes[d])).collect();
    Ok((ComputationSubgraph { center, hops, nodes, edges, parent_edges }, sub))
}
