//! GNNExplainer recovers a planted edge and feature.

use std::time::Instant;

use gnnx_core::explain::{run_gnn_explainer, ExplainConfig};
use gnnx_core::training::{train_model, GraphTensors, TrainConfig};
use gnnx_core::{Mode, Model32, ModelConfig};

use super::context::{Ctx, Verdict};
use crate::planted::{planted_motif, SIGNAL_FEATURE};

const RUNS: usize = 25;

pub fn run(_: &Ctx) -> Verdict {
    let start = Instant::now();
    let p = planted_motif(200, 12, 1);
    let tcfg = TrainConfig { epochs_max: 500, patience: 200, lr: 0.01, ..Default::default() };
    let (model, report): (Model32, _) = train_model(&p.dataset, ModelConfig::gcn(12, 2).with_seed(1), &tcfg).unwrap();
    let g = GraphTensors::<f32>::from_dataset(&p.dataset).unwrap();
    let predicted = model.forward(&g.input(), Mode::Eval).unwrap().predicted;
    let cases: Vec<(usize, usize)> =
        p.centers.iter().zip(&p.keys).filter_map(|(&c, k)| k.filter(|_| predicted[c] == 1).map(|k| (c, k))).take(RUNS).collect();
    if cases.len() < RUNS {
        return Verdict::Fail(format!("only {} correctly classified planted centers", cases.len()));
    }
    let mut hits = 0;
    for (run, &(c, key)) in cases.iter().enumerate() {
        let cfg = ExplainConfig { seed: run as u64, ..Default::default() };
        let e = run_gnn_explainer(&model, &g.features, &g.adjacency, c, &cfg, None).unwrap();
        let edge_ok = (e.top_edges[0].u, e.top_edges[0].v) == (key.min(c), key.max(c));
        hits += (edge_ok && e.top_features[0].index == SIGNAL_FEATURE) as usize;
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict::check(
        hits * 5 >= 4 * RUNS && secs < 120.0,
        format!("{hits}/{RUNS} runs rank planted edge and feature first (need 80%); model test accuracy {:.3}; {secs:.1}s < 120s", report.test_accuracy),
    )
}
