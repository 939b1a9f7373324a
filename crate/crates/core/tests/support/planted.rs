//! Planted-motif fixture: a forest of stars. A center is class 1 exactly
//! when one of its leaves (the key) carries the signal feature, so the
//! key→center edge and the signal feature are the ground-truth explanation.

use gnnx_core::dataset::{GraphDataset, UNLABELED};
use gnnx_core::numerics::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SIGNAL_FEATURE: usize = 0;

pub struct Planted {
    pub dataset: GraphDataset,
    pub centers: Vec<usize>,
    /// Key leaf of each class-1 center, indexed like `centers`.
    pub keys: Vec<Option<usize>>,
}

pub fn planted_motif(num_stars: usize, num_features: usize, seed: u64) -> Planted {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<Vec<f32>> = Vec::new();
    let mut labels = Vec::new();
    let mut edges = Vec::new();
    let mut centers = Vec::new();
    let mut keys = Vec::new();
    let noise_row = |rng: &mut ChaCha8Rng| {
        let mut r = vec![0.0f32; num_features];
        for _ in 0..2 {
            r[rng.random_range(1..num_features)] = 1.0;
        }
        r
    };
    for s in 0..num_stars {
        let positive = s % 2 == 1;
        let center = rows.len();
        rows.push(noise_row(&mut rng));
        labels.push(positive as u16);
        centers.push(center);
        let leaves = rng.random_range(3..=6);
        let key_slot = rng.random_range(0..leaves);
        let mut key = None;
        for l in 0..leaves {
            let id = rows.len();
            let mut r = noise_row(&mut rng);
            if positive && l == key_slot {
                r[SIGNAL_FEATURE] = 1.0;
                key = Some(id);
            }
            rows.push(r);
            labels.push(UNLABELED);
            edges.push((center, id));
        }
        keys.push(key);
    }
    let n = rows.len();
    let split = |k: usize| {
        let mut m = vec![false; n];
        for (i, &c) in centers.iter().enumerate() {
            m[c] = match i % 5 {
                0..=2 => k == 0,
                3 => k == 1,
                _ => k == 2,
            };
        }
        m
    };
    let dataset = GraphDataset {
        name: "planted-motif".into(),
        num_classes: 2,
        features: Matrix::from_vec(n, num_features, rows.concat()).unwrap(),
        edges,
        labels,
        train_mask: split(0),
        val_mask: split(1),
        test_mask: split(2),
        class_names: vec!["absent".into(), "present".into()],
        feature_names: Some((0..num_features).map(|k| if k == SIGNAL_FEATURE { "signal".into() } else { format!("noise{k}") }).collect()),
    };
    Planted { dataset, centers, keys }
}
