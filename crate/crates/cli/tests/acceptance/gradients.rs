//! Analytic gradients against central differences on ≤ 20-node fixtures.

use std::time::Instant;

use gnnx_core::explain::{explainer_loss, extract_computation_subgraph, undirected_groups, ExplainConfig};
use gnnx_core::models::nll_loss;
use gnnx_core::numerics::{build_normalized_adjacency, finite_difference_check, GradCheckOptions, GradCheckReport, Matrix};
use gnnx_core::{Arch, GraphInput, Mode, Model, ModelConfig, SparseAdjacency};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::context::{Ctx, Verdict};

const TOLERANCE: f64 = 1e-4;

struct Fixture {
    x: Matrix<f64>,
    adj: SparseAdjacency<f64>,
    labels: Vec<u16>,
}

fn fixture(n: usize, f: usize, seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.random_range(0..i), i)).collect();
    edges.extend((0..n).map(|_| (rng.random_range(0..n), rng.random_range(0..n))).filter(|(u, v)| u != v));
    Fixture {
        x: Matrix::from_vec(n, f, (0..n * f).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap(),
        adj: build_normalized_adjacency(&edges, n).unwrap(),
        labels: (0..n).map(|i| (i % 3) as u16).collect(),
    }
}

fn model(arch: Arch, f: usize) -> Model<f64> {
    let mut cfg = ModelConfig::for_arch(arch, f, 3).with_seed(11);
    (cfg.hidden_dim, cfg.heads_layer1) = if arch == Arch::Gat { (4, 3) } else { (6, 1) };
    let mut m = Model::<f64>::init(cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for t in m.params.tensors_mut().into_iter().filter(|t| t.rows() == 1) {
        t.data_mut().iter_mut().for_each(|b| *b = rng.random_range(-0.1..0.1));
    }
    m
}

fn opts() -> GradCheckOptions {
    GradCheckOptions { eps: 1e-5, tolerance: TOLERANCE, max_coords: usize::MAX, seed: 0 }
}

fn params(arch: Arch, mode: Mode) -> GradCheckReport {
    let fx = fixture(12, 5, 7);
    let base = model(arch, 5);
    let train: Vec<usize> = (0..12).step_by(2).collect();
    finite_difference_check(
        |theta| {
            let mut m = base.clone();
            m.params.assign_flat(theta).unwrap();
            let input = GraphInput::new(&fx.x, &fx.adj);
            let (out, cache) = m.forward_cached(&input, mode).unwrap();
            let (loss, d) = nll_loss(&out.log_probs, &fx.labels, &train);
            (loss, m.backward(&input, &cache, &d).unwrap().params.flatten())
        },
        &base.params.flatten(),
        opts(),
    )
    .unwrap()
}

fn masks(arch: Arch) -> GradCheckReport {
    let fx = fixture(14, 6, 21);
    let m = model(arch, 6);
    let ne = fx.adj.num_edges();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let init: Vec<f64> = (0..ne + 6).map(|_| rng.random_range(0.2..1.0)).collect();
    finite_difference_check(
        |theta| {
            let (ew, fm) = theta.split_at(ne);
            let input = GraphInput { features: &fx.x, adjacency: &fx.adj, edge_weights: Some(ew), feature_mask: Some(fm) };
            let (out, cache) = m.forward_cached(&input, Mode::Eval).unwrap();
            let (loss, d) = nll_loss(&out.log_probs, &fx.labels, &[3]);
            let g = m.backward(&input, &cache, &d).unwrap();
            (loss, g.edge_weights.unwrap().into_iter().chain(g.feature_mask.unwrap()).collect())
        },
        &init,
        opts(),
    )
    .unwrap()
}

fn explainer(arch: Arch) -> GradCheckReport {
    let fx = fixture(16, 5, 77);
    let m = model(arch, 5);
    let (sub, sub_adj) = extract_computation_subgraph(&fx.adj, 4, 2).unwrap();
    let x = fx.x.select_rows(&sub.nodes);
    let (pairs, group) = undirected_groups(&sub.edges);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let init: Vec<f64> = (0..pairs.len() + 5).map(|_| rng.random_range(-1.0..1.0)).collect();
    let cfg = ExplainConfig::default();
    finite_difference_check(
        |theta| {
            let (e, f) = theta.split_at(pairs.len());
            let (loss, de, df) = explainer_loss(&m, &x, &sub_adj, &group, sub.center_local(), 1, e, f, &cfg).unwrap();
            (loss.total, de.into_iter().chain(df).collect())
        },
        &init,
        opts(),
    )
    .unwrap()
}

pub fn run(_: &Ctx) -> Verdict {
    let start = Instant::now();
    let checks = [
        ("gcn", params(Arch::Gcn, Mode::Eval)),
        ("gcn+dropout", params(Arch::Gcn, Mode::Train { seed: 5 })),
        ("gat", params(Arch::Gat, Mode::Eval)),
        ("gat+dropout", params(Arch::Gat, Mode::Train { seed: 3 })),
        ("gcn-masks", masks(Arch::Gcn)),
        ("gat-masks", masks(Arch::Gat)),
        ("gcn-explainer", explainer(Arch::Gcn)),
        ("gat-explainer", explainer(Arch::Gat)),
    ];
    let secs = start.elapsed().as_secs_f64();
    let ok = checks.iter().all(|(_, r)| r.pass && r.max_relative_error < TOLERANCE) && secs < 30.0;
    let detail = checks.iter().map(|(n, r)| format!("{n} {:.1e} ({} coords)", r.max_relative_error, r.coords_checked)).collect::<Vec<_>>();
    Verdict::check(ok, format!("max relative error < {TOLERANCE:.0e}, total {secs:.1}s < 30s: {}", detail.join(", ")))
}
