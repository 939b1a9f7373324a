use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::matrix::{dot, Matrix};
use crate::scalar::Scalar;

/// Message-passing operator in compressed row form.
///
/// Row `i` lists the sources `j` whose messages node `i` aggregates, always
/// including the self-loop `j == i`. Entries within a row are sorted by
/// source id. Every non-self entry is a directed edge `(src, dst)` with an
/// index into [`SparseAdjacency::edges`]; optional per-edge multipliers
/// (explanation masks) are indexed the same way.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseAdjacency<T> {
    num_nodes: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<T>,
    entry_edge: Vec<Option<usize>>,
    edges: Vec<(usize, usize)>,
}

/// Symmetric-normalized `D̃^{-1/2}(A+I)D̃^{-1/2}` for an undirected edge list.
///
/// Self-loop pairs and duplicates in `edges` are ignored; each node gets
/// exactly one self-loop.
pub fn build_normalized_adjacency<T: Scalar>(
    edges: &[(usize, usize)],
    num_nodes: usize,
) -> Result<SparseAdjacency<T>> {
    let mut rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); num_nodes];
    for &(u, v) in edges {
        for n in [u, v] {
            if n >= num_nodes {
                return Err(Error::InvalidNodeId { node: n, num_nodes });
            }
        }
        if u == v {
            continue;
        }
        rows[u].insert(v);
        rows[v].insert(u);
    }
    for (i, r) in rows.iter_mut().enumerate() {
        r.insert(i);
    }
    let degree: Vec<f64> = rows.iter().map(|r| r.len() as f64).collect();

    let nnz: usize = rows.iter().map(BTreeSet::len).sum();
    let mut row_ptr = Vec::with_capacity(num_nodes + 1);
    let mut col = Vec::with_capacity(nnz);
    let mut val = Vec::with_capacity(nnz);
    let mut entry_edge = Vec::with_capacity(nnz);
    let mut directed = Vec::with_capacity(nnz - num_nodes);
    row_ptr.push(0);
    for (i, r) in rows.iter().enumerate() {
        for &j in r {
            col.push(j);
            val.push(T::of(1.0 / (degree[i] * degree[j]).sqrt()));
            if i == j {
                entry_edge.push(None);
            } else {
                entry_edge.push(Some(directed.len()));
                directed.push((j, i));
            }
        }
        row_ptr.push(col.len());
    }
    Ok(SparseAdjacency { num_nodes, row_ptr, col, val, entry_edge, edges: directed })
}

impl<T: Scalar> SparseAdjacency<T> {
    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of stored entries, self-loops included.
    #[inline]
    pub fn nnz(&self) -> usize {
        self.col.len()
    }

    /// Directed edges `(src, dst)` excluding self-loops, in entry order.
    #[inline]
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    #[inline]
    pub fn col(&self, entry: usize) -> usize {
        self.col[entry]
    }

    #[inline]
    pub fn value(&self, entry: usize) -> T {
        self.val[entry]
    }

    #[inline]
    pub fn entry_edge(&self, entry: usize) -> Option<usize> {
        self.entry_edge[entry]
    }

    /// Entry value times its edge multiplier (self-loops are never scaled).
    #[inline]
    pub fn weighted_value(&self, entry: usize, weights: Option<&[T]>) -> T {
        match (weights, self.entry_edge[entry]) {
            (Some(w), Some(e)) => self.val[entry] * w[e],
            _ => self.val[entry],
        }
    }

    /// Entry index of the stored pair `(row, col)`.
    pub fn find(&self, row: usize, col: usize) -> Option<usize> {
        let r = self.row_range(row);
        self.col[r.clone()].binary_search(&col).ok().map(|k| r.start + k)
    }

    /// Dense `(A+I)` normalized matrix, for tests and tiny graphs.
    pub fn to_dense(&self) -> Matrix<T> {
        let mut m = Matrix::zeros(self.num_nodes, self.num_nodes);
        for i in 0..self.num_nodes {
            for e in self.row_range(i) {
                m.set(i, self.col[e], self.val[e]);
            }
        }
        m
    }

    pub(crate) fn check_weights(&self, weights: Option<&[T]>) -> Result<()> {
        if let Some(w) = weights {
            if w.len() != self.edges.len() {
                return Err(Error::ShapeMismatch(format!(
                    "{} edge weights for {} directed edges",
                    w.len(),
                    self.edges.len()
                )));
            }
        }
        Ok(())
    }

    /// `out[i] = Σ_j a_ij · w_ij · x[j]`.
    pub fn propagate(&self, x: &Matrix<T>, weights: Option<&[T]>) -> Result<Matrix<T>> {
        if x.rows() != self.num_nodes {
            return Err(Error::ShapeMismatch(format!(
                "propagate over {} nodes with {} feature rows",
                self.num_nodes,
                x.rows()
            )));
        }
        self.check_weights(weights)?;
        let c = x.cols();
        let mut out = Matrix::zeros(self.num_nodes, c);
        if c == 0 {
            return Ok(out);
        }
        let kernel = |(i, out_row): (usize, &mut [T])| {
            for e in self.row_range(i) {
                let a = self.weighted_value(e, weights);
                for (o, &v) in out_row.iter_mut().zip(x.row(self.col[e])) {
                    *o += a * v;
                }
            }
        };
        if self.num_nodes * c >= 1 << 14 {
            out.data_mut().par_chunks_mut(c).enumerate().for_each(kernel);
        } else {
            out.data_mut().chunks_mut(c).enumerate().for_each(kernel);
        }
        Ok(out)
    }

    /// Transposed propagation: `out[j] = Σ_i a_ij · w_ij · g[i]`.
    pub fn propagate_t(&self, g: &Matrix<T>, weights: Option<&[T]>) -> Result<Matrix<T>> {
        if g.rows() != self.num_nodes {
            return Err(Error::ShapeMismatch(format!(
                "propagate_t over {} nodes with {} rows",
                self.num_nodes,
                g.rows()
            )));
        }
        self.check_weights(weights)?;
        let c = g.cols();
        let mut out = Matrix::zeros(self.num_nodes, c);
        for i in 0..self.num_nodes {
            let g_row = g.row(i);
            for e in self.row_range(i) {
                let a = self.weighted_value(e, weights);
                for (o, &v) in out.row_mut(self.col[e]).iter_mut().zip(g_row) {
                    *o += a * v;
                }
            }
        }
        Ok(out)
    }

    /// Gradient of `propagate(x, w)` with respect to each edge multiplier,
    /// given the upstream gradient `g` of the output.
    pub fn edge_weight_grad(&self, g: &Matrix<T>, x: &Matrix<T>) -> Vec<T> {
        let mut grad = vec![T::zero(); self.edges.len()];
        for i in 0..self.num_nodes {
            for e in self.row_range(i) {
                if let Some(k) = self.entry_edge[e] {
                    grad[k] = self.val[e] * dot(g.row(i), x.row(self.col[e]));
                }
            }
        }
        grad
    }

    /// Induced operator on `nodes` (sorted ascending, unique). Entry values are
    /// kept from the parent, so degrees stay those of the full graph. Returns
    /// the sub-operator and, per sub-edge, the parent edge index.
    pub fn restrict(&self, nodes: &[usize]) -> Result<(SparseAdjacency<T>, Vec<usize>)> {
        let mut local = vec![usize::MAX; self.num_nodes];
        for (k, &n) in nodes.iter().enumerate() {
            if n >= self.num_nodes {
                return Err(Error::InvalidNodeId { node: n, num_nodes: self.num_nodes });
            }
            local[n] = k;
        }
        let mut row_ptr = vec![0];
        let mut col = Vec::new();
        let mut val = Vec::new();
        let mut entry_edge = Vec::new();
        let mut edges = Vec::new();
        let mut parent_edge = Vec::new();
        for (li, &gi) in nodes.iter().enumerate() {
            for e in self.row_range(gi) {
                let lj = local[self.col[e]];
                if lj == usize::MAX {
                    continue;
                }
                col.push(lj);
                val.push(self.val[e]);
                match self.entry_edge[e] {
                    None => entry_edge.push(None),
                    Some(pe) => {
                        entry_edge.push(Some(edges.len()));
                        edges.push((lj, li));
                        parent_edge.push(pe);
                    }
                }
            }
            row_ptr.push(col.len());
        }
        Ok((
            SparseAdjacency { num_nodes: nodes.len(), row_ptr, col, val, entry_edge, edges },
            parent_edge,
        ))
    }

    pub fn cast<U: Scalar>(&self) -> SparseAdjacency<U> {
        SparseAdjacency {
            num_nodes: self.num_nodes,
            row_ptr: self.row_ptr.clone(),
            col: self.col.clone(),
            val: self.val.iter().map(|&v| U::of(v.as_f64())).collect(),
            entry_edge: self.entry_edge.clone(),
            edges: self.edges.clone(),
        }
    }
}
