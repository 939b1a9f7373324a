//! PCA and t-SNE checks on hidden-layer embeddings.

use std::time::Instant;

use gnnx_core::dataset::GraphDataset;
use gnnx_core::projection::{conditional_affinities, pca_project, tsne_project, Diagnostics, TsneConfig};
use gnnx_core::training::GraphTensors;
use gnnx_core::{Arch, Matrix, Mode};

use super::context::{Ctx, Verdict, CORA};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn variance(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = v.clone().count() as f64;
    let m = v.clone().sum::<f64>() / n;
    v.map(|x| (x - m).powi(2)).sum::<f64>() / n
}

fn checks(ctx: &Ctx, ds: &GraphDataset) -> (bool, String) {
    let model = ctx.trained(ds, Arch::Gcn).model.clone();
    let g = GraphTensors::<f32>::from_dataset(ds).unwrap();
    let emb: Matrix<f64> = model.forward(&g.input(), Mode::Eval).unwrap().embeddings.cast();
    let mut parts = Vec::new();

    let pca = pca_project(&emb).unwrap();
    let Diagnostics::Pca { explained_variance_ratio: [r0, r1], components } = &pca.diagnostics else { unreachable!() };
    let ortho = [
        (dot(&components[0], &components[0]) - 1.0).abs(),
        (dot(&components[1], &components[1]) - 1.0).abs(),
        dot(&components[0], &components[1]).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let (v0, v1) = (variance(pca.coords.iter().map(|c| c[0])), variance(pca.coords.iter().map(|c| c[1])));
    let pca_ok = ortho < 1e-6 && r0 >= r1 && v0 >= v1;
    parts.push(format!("PCA orthonormality error {ortho:.1e}, ratios {r0:.3} ≥ {r1:.3}, coord variance {v0:.3} ≥ {v1:.3}"));

    let sample = emb.select_rows(&(0..emb.rows().min(500)).collect::<Vec<_>>());
    let perplexity = 30.0;
    let (p, h) = conditional_affinities(&sample, perplexity);
    let n = sample.rows();
    let calib = (0..n)
        .map(|i| {
            let row = &p[i * n..(i + 1) * n];
            let entropy: f64 = row.iter().filter(|&&v| v > 0.0).map(|v| -v * v.ln()).sum();
            ((entropy - perplexity.ln()).abs() / perplexity.ln()).max((h[i] - entropy).abs()).max((row.iter().sum::<f64>() - 1.0).abs())
        })
        .fold(0.0, f64::max);
    parts.push(format!("perplexity calibration max relative entropy error {calib:.1e} over {n} rows"));

    let r = tsne_project(&sample, &TsneConfig::default()).unwrap();
    let Diagnostics::Tsne { kl_trace, .. } = &r.diagnostics else { unreachable!() };
    let at = |it: usize| kl_trace.iter().find(|(i, _)| *i == it).map(|p| p.1).unwrap_or(f64::NAN);
    let (k300, k1000) = (at(300), at(1000));
    parts.push(format!("KL(300) {k300:.4} ≥ KL(1000) {k1000:.4}"));

    let start = Instant::now();
    let full = tsne_project(&emb, &TsneConfig::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let finite = full.coords.iter().all(|c| c[0].is_finite() && c[1].is_finite());
    parts.push(format!("t-SNE on {} embeddings {secs:.1}s < 600s", emb.rows()));

    (pca_ok && calib < 1e-3 && k1000 <= k300 && finite && secs < 600.0, parts.join("; "))
}

pub fn run(ctx: &Ctx) -> Verdict {
    match ctx.real(CORA) {
        Ok(ds) => {
            let (ok, d) = checks(ctx, &ds);
            Verdict::check(ok, d)
        }
        Err(reason) => {
            let (ok, d) = checks(ctx, &ctx.proxy(CORA));
            let tag = if ok { "would pass" } else { "would fail" };
            Verdict::Blocked {
                reason: format!("{reason} (PCA, calibration and KL checks are dataset-agnostic; the runtime bound is stated on Cora)"),
                proxy: Some(format!("{tag} on synthetic Cora-sized embeddings: {d}")),
            }
        }
    }
}
