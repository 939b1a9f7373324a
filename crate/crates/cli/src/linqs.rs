//! Reader for the LINQS citation distribution: a `.content` file with one
//! `<id> <0/1 word attributes…> <class>` row per paper and a `.cites` file
//! of `<cited> <citing>` pairs.

use std::collections::{BTreeSet, HashMap};

use gnnx_core::dataset::{canonical_edges, make_random_split, GraphDataset, SplitSpec};
use gnnx_core::numerics::Matrix;
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LinqsStats {
    pub nodes: usize,
    pub edges: usize,
    /// Citations naming a paper absent from the content file.
    pub dangling_citations: usize,
    pub self_citations: usize,
}

fn malformed(file: &str, line: usize, reason: impl Into<String>) -> CliError {
    CliError::data("malformed-file", format!("{file}: line {line}: {}", reason.into()))
}

/// Builds a dataset with a seeded per-class random split. Nodes follow the
/// content file's row order; class ids follow the sorted class names.
pub fn parse_linqs(name: &str, content: &str, cites: &str, split: &SplitSpec) -> Result<(GraphDataset, LinqsStats), CliError> {
    let mut ids = HashMap::new();
    let mut rows = Vec::new();
    let mut raw_labels = Vec::new();
    let mut width = None;
    for (k, line) in content.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 3 {
            return Err(malformed("content", k + 1, "expected id, attributes and class"));
        }
        let attrs = &fields[1..fields.len() - 1];
        if *width.get_or_insert(attrs.len()) != attrs.len() {
            return Err(malformed("content", k + 1, format!("{} attributes, expected {}", attrs.len(), width.unwrap())));
        }
        let row = attrs
            .iter()
            .map(|a| a.parse::<f32>().map_err(|_| malformed("content", k + 1, format!("attribute {a:?} is not a number"))))
            .collect::<Result<Vec<_>, _>>()?;
        if ids.insert(fields[0].to_string(), rows.len()).is_some() {
            return Err(malformed("content", k + 1, format!("duplicate paper id {}", fields[0])));
        }
        rows.push(row);
        raw_labels.push(fields[fields.len() - 1].to_string());
    }
    if rows.is_empty() {
        return Err(CliError::data("malformed-file", "content: no rows"));
    }
    let class_names: Vec<String> = raw_labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let labels = raw_labels.iter().map(|l| class_names.binary_search(l).expect("collected above") as u16).collect();

    let mut stats = LinqsStats { nodes: rows.len(), edges: 0, dangling_citations: 0, self_citations: 0 };
    let mut pairs = Vec::new();
    for (k, line) in cites.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 2 {
            return Err(malformed("cites", k + 1, "expected two paper ids"));
        }
        match (ids.get(f[0]), ids.get(f[1])) {
            (Some(&a), Some(&b)) if a == b => stats.self_citations += 1,
            (Some(&a), Some(&b)) => pairs.push((a, b)),
            _ => stats.dangling_citations += 1,
        }
    }
    let edges = canonical_edges(pairs);
    stats.edges = edges.len();
    let n = rows.len();
    let features = Matrix::from_vec(n, width.unwrap_or(0), rows.concat())?;
    let ds = GraphDataset {
        name: name.to_string(),
        num_classes: class_names.len(),
        features,
        edges,
        labels,
        train_mask: vec![false; n],
        val_mask: vec![false; n],
        test_mask: vec![false; n],
        class_names,
        feature_names: None,
    };
    Ok((make_random_split(&ds, split)?, stats))
}
