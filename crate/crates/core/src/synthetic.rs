//! Seeded citation-like graphs: a contextual stochastic block model with
//! sparse binary bag-of-words features.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{make_random_split, GraphDataset, SplitSpec};
use crate::error::{Error, Result};
use crate::numerics::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CitationLikeConfig {
    pub name: String,
    pub num_nodes: usize,
    pub num_classes: usize,
    pub num_features: usize,
    /// Undirected edges to draw (duplicates are dropped).
    pub num_edges: usize,
    /// Probability that an edge joins two nodes of the same class.
    pub homophily: f64,
    pub words_per_node: usize,
    /// Probability that a word comes from the node's class vocabulary.
    pub topic_strength: f64,
    pub split: SplitSpec,
    pub seed: u64,
}

impl Default for CitationLikeConfig {
    /// Sizes of the common 2708-node citation benchmark.
    fn default() -> Self {
        Self {
            name: "citation-like".into(),
            num_nodes: 2708,
            num_classes: 7,
            num_features: 1433,
            num_edges: 5278,
            homophily: 0.8,
            words_per_node: 18,
            topic_strength: 0.35,
            split: SplitSpec::default(),
            seed: 0,
        }
    }
}

pub fn citation_like(cfg: &CitationLikeConfig) -> Result<GraphDataset> {
    let (n, c, f) = (cfg.num_nodes, cfg.num_classes, cfg.num_features);
    if n < 2 || c == 0 || f < c || !(0.0..=1.0).contains(&cfg.homophily) || !(0.0..=1.0).contains(&cfg.topic_strength) {
        return Err(Error::InvalidConfig("citation-like generator: inconsistent sizes or probabilities".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let labels: Vec<u16> = (0..n).map(|i| (i % c) as u16).collect();
    let members: Vec<Vec<usize>> = (0..c).map(|k| (0..n).filter(|&i| labels[i] as usize == k).collect()).collect();

    // each class owns a contiguous slice of the vocabulary
    let topic = |k: usize| (k * f / c)..((k + 1) * f / c);
    let mut features = Matrix::zeros(n, f);
    for i in 0..n {
        let range = topic(labels[i] as usize);
        for _ in 0..cfg.words_per_node {
            let w = if rng.random::<f64>() < cfg.topic_strength {
                rng.random_range(range.clone())
            } else {
                rng.random_range(0..f)
            };
            features.set(i, w, 1.0f32);
        }
    }

    let mut edges = BTreeSet::new();
    let mut attempts = 0;
    while edges.len() < cfg.num_edges && attempts < cfg.num_edges * 20 {
        attempts += 1;
        let u = rng.random_range(0..n);
        let v = if rng.random::<f64>() < cfg.homophily {
            let pool = &members[labels[u] as usize];
            pool[rng.random_range(0..pool.len())]
        } else {
            rng.random_range(0..n)
        };
        if u != v {
            edges.insert((u.min(v), u.max(v)));
        }
    }

    let ds = GraphDataset {
        name: cfg.name.clone(),
        num_classes: c,
        features,
        edges: edges.into_iter().collect(),
        labels,
        train_mask: vec![false; n],
        val_mask: vec![false; n],
        test_mask: vec![false; n],
        class_names: (0..c).map(|k| format!("class-{k}")).collect(),
        feature_names: None,
    };
    make_random_split(&ds, &cfg.split)
}
