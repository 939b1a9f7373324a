//! Criteria on the citation benchmarks: training accuracy, explanation
//! fidelity and the two case studies.

use std::process::Command;
use std::time::Duration;

use gnnx_core::dataset::GraphDataset;
use gnnx_core::explain::{normalized_top_k_entropy, run_gnn_explainer, ExplainConfig};
use gnnx_core::training::GraphTensors;
use gnnx_core::{export_dataset, Arch, Mode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use super::context::{log_probs_without, mean, t_stat, Ctx, Verdict, CITESEER, CORA};

const TRAIN_BUDGET: Duration = Duration::from_secs(300);

/// Runs `on` against the real dataset, or reports it blocked with `on`'s
/// result on the synthetic stand-in.
fn on_benchmark(ctx: &Ctx, name: &str, on: impl Fn(&Ctx, &GraphDataset) -> (bool, String)) -> Verdict {
    match ctx.real(name) {
        Ok(ds) => {
            let (ok, detail) = on(ctx, &ds);
            Verdict::check(ok, detail)
        }
        Err(reason) => {
            let (ok, detail) = on(ctx, &ctx.proxy(name));
            let tag = if ok { "would pass" } else { "would fail" };
            Verdict::Blocked { reason, proxy: Some(format!("{tag} on synthetic {name}-sized graph: {detail}")) }
        }
    }
}

pub fn training(ctx: &Ctx) -> Verdict {
    let thresholds = [(CORA, 0.78), (CITESEER, 0.65)];
    let run = |ctx: &Ctx, ds: &GraphDataset, threshold: f64| {
        let mut ok = true;
        let mut parts = Vec::new();
        for arch in [Arch::Gcn, Arch::Gat] {
            let t = ctx.trained(ds, arch);
            ok &= t.report.test_accuracy >= threshold && t.elapsed < TRAIN_BUDGET;
            parts.push(format!(
                "{} {arch} test {:.3} (need {threshold}, {} epochs, {:.1}s)",
                ds.name,
                t.report.test_accuracy,
                t.report.epochs_run,
                t.elapsed.as_secs_f64()
            ));
        }
        (ok, parts.join(", "))
    };
    let mut verdicts = thresholds.iter().map(|&(name, thr)| on_benchmark(ctx, name, |c, ds| run(c, ds, thr)));
    let (a, b) = (verdicts.next().unwrap(), verdicts.next().unwrap());
    combine(a, b)
}

fn combine(a: Verdict, b: Verdict) -> Verdict {
    use Verdict::*;
    let text = |v: &Verdict| match v {
        Pass(d) | Fail(d) => d.clone(),
        Blocked { reason, .. } => format!("blocked: {reason}"),
    };
    let proxy = |v: &Verdict| match v {
        Blocked { proxy, .. } => proxy.clone(),
        _ => None,
    };
    let joined = format!("{}; {}", text(&a), text(&b));
    match (&a, &b) {
        (Pass(_), Pass(_)) => Pass(joined),
        (Fail(_), _) | (_, Fail(_)) => Fail(joined),
        _ => Blocked { reason: joined, proxy: [proxy(&a), proxy(&b)].into_iter().flatten().reduce(|x, y| format!("{x}; {y}")) },
    }
}

pub fn fidelity(ctx: &Ctx) -> Verdict {
    on_benchmark(ctx, CORA, |ctx, ds| {
        let model = ctx.trained(ds, Arch::Gcn).model.clone();
        let g = GraphTensors::<f32>::from_dataset(ds).unwrap();
        let predicted = model.forward(&g.input(), Mode::Eval).unwrap().predicted;
        let neighbors = ds.neighbor_lists();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let nodes: Vec<usize> = (0..ds.num_nodes())
            .filter(|&i| ds.test_mask[i] && ds.label(i) == Some(predicted[i]) && !neighbors[i].is_empty())
            .take(60)
            .collect();
        let mut diffs = Vec::new();
        for &node in &nodes {
            let e = run_gnn_explainer(&model, &g.features, &g.adjacency, node, &ExplainConfig::default(), None).unwrap();
            let Some(top) = e.top_edges.first() else { continue };
            let j = neighbors[node][rng.random_range(0..neighbors[node].len())];
            let class = predicted[node];
            let base = log_probs_without(ds, &model, node, None)[class];
            let drop_top = base - log_probs_without(ds, &model, node, Some((top.u, top.v)))[class];
            let drop_random = base - log_probs_without(ds, &model, node, Some((node.min(j), node.max(j))))[class];
            diffs.push(drop_top - drop_random);
        }
        let m = mean(&diffs);
        (
            diffs.len() >= 50 && m > 0.0,
            format!(
                "GCN, {} correctly classified test nodes: mean paired drop (top-1 explained − random incident) = {m:.4} (need > 0), t = {:.2}, top-1 larger in {}/{}",
                diffs.len(),
                t_stat(&diffs),
                diffs.iter().filter(|&&d| d > 0.0).count(),
                diffs.len()
            ),
        )
    })
}

pub fn case_study_1(ctx: &Ctx) -> Verdict {
    on_benchmark(ctx, CORA, |ctx, ds| {
        let t = ctx.trained(ds, Arch::Gcn);
        let dir = ctx.work.path().join(format!("probe-{}", ds.name));
        std::fs::create_dir_all(&dir).unwrap();
        let (data, model, report) = (dir.join("data.gnnds"), dir.join("gcn.gnnw"), dir.join("flip.jsonl"));
        export_dataset(ds, &data).unwrap();
        t.model.save(&model).unwrap();
        let out = Command::new(env!("CARGO_BIN_EXE_gnnx"))
            .args(["probe", "--find-single-edge-flip"])
            .arg("--dataset")
            .arg(&data)
            .arg("--model")
            .arg(&model)
            .arg("--out")
            .arg(&report)
            .output()
            .unwrap();
        if !out.status.success() {
            return (false, format!("probe exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
        }
        let lines: Vec<Value> = std::fs::read_to_string(&report).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        let done = lines.last().unwrap();
        let scanned = format!("{} misclassified nodes, {} removals tried", done["misclassified"], done["edges_tried"]);
        match lines.iter().find(|l| l["record"] == "flip") {
            Some(f) => (
                true,
                format!(
                    "removing edge {} corrects node {} from {} to {}; {scanned}",
                    f["hit"]["removed_edge"], f["hit"]["node"], f["old_class_name"], f["true_class_name"]
                ),
            ),
            None => (false, format!("no single-edge removal corrects any prediction; {scanned}")),
        }
    })
}

pub fn case_study_2(ctx: &Ctx) -> Verdict {
    on_benchmark(ctx, CITESEER, |ctx, ds| {
        let gcn = ctx.trained(ds, Arch::Gcn).model.clone();
        let gat = ctx.trained(ds, Arch::Gat).model.clone();
        let g = GraphTensors::<f32>::from_dataset(ds).unwrap();
        let p_gcn = gcn.forward(&g.input(), Mode::Eval).unwrap().predicted;
        let p_gat = gat.forward(&g.input(), Mode::Eval).unwrap().predicted;
        let neighbors = ds.neighbor_lists();
        let shared: Vec<usize> = (0..ds.num_nodes())
            .filter(|&i| ds.test_mask[i] && !neighbors[i].is_empty() && ds.label(i) == Some(p_gcn[i]) && ds.label(i) == Some(p_gat[i]))
            .take(24)
            .collect();
        let cfg = ExplainConfig::default();
        let entropy = |m: &gnnx_core::Model32, node| {
            let e = run_gnn_explainer(m, &g.features, &g.adjacency, node, &cfg, None).unwrap();
            normalized_top_k_entropy(&e.edge_mask, 10)
        };
        let h_gcn: Vec<f64> = shared.iter().map(|&n| entropy(&gcn, n)).collect();
        let h_gat: Vec<f64> = shared.iter().map(|&n| entropy(&gat, n)).collect();
        let diffs: Vec<f64> = h_gcn.iter().zip(&h_gat).map(|(a, b)| a - b).collect();
        let (mg, ma) = (mean(&h_gcn), mean(&h_gat));
        (
            shared.len() >= 20 && ma < mg,
            format!(
                "{} shared correct nodes: mean top-10 edge-mask entropy GAT {ma:.4} vs GCN {mg:.4} (need GAT < GCN), paired t = {:.2}, GAT lower on {}/{}",
                shared.len(),
                t_stat(&diffs),
                diffs.iter().filter(|&&d| d > 0.0).count(),
                diffs.len()
            ),
        )
    })
}
