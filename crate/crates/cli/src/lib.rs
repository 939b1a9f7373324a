//! The `gnnx` command-line driver. [`run`] maps argv to an exit code; every
//! failure is printed to stderr as `{"error": {"code", "message"}}`.

pub mod cli;
pub mod error;
pub mod linqs;
pub mod probe;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Parser;
use gnnx_core::dataset::{export_dataset, load_dataset, SplitSpec};
use gnnx_core::explain::run_gnn_explainer;
use gnnx_core::projection::{pca_project, tsne_project, Diagnostics, ProjectionMethod, TsneConfig};
use gnnx_core::report::{projection_lines, train_report_lines, write_jsonl, ExplanationLine};
use gnnx_core::synthetic::{citation_like, CitationLikeConfig};
use gnnx_core::training::GraphTensors;
use gnnx_core::{evaluate, train_model, ExplainConfig, Mode, Model, ModelConfig, Split, TrainConfig};
use serde_json::{json, Value};

use cli::{Cli, Command, ConvertCommand, SplitArgs};
pub use error::{CliError, EXIT_COMPUTE, EXIT_DATA, EXIT_OK, EXIT_USAGE};

type CliResult<T> = Result<T, CliError>;

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, S>(argv: I) -> u8
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit
        }
    }
}

/// Runs one command; the returned JSON is the stdout summary line.
pub fn execute(command: Command) -> CliResult<Value> {
    match command {
        Command::Train(a) => {
            let ds = load_dataset(&a.dataset)?;
            let mut mc = ModelConfig::for_arch(a.arch, ds.num_features(), ds.num_classes).with_seed(a.seed);
            if let Some(h) = a.hidden_dim {
                mc.hidden_dim = h;
            }
            if let Some(p) = a.dropout {
                mc.dropout_rate = p;
            }
            let tc = TrainConfig { epochs_max: a.epochs, lr: a.lr, weight_decay: a.weight_decay, patience: a.patience, seed: a.seed };
            let (model, report) = train_model::<f32>(&ds, mc, &tc)?;
            model.save(&a.out)?;
            let report_path = a.report.unwrap_or_else(|| with_suffix(&a.out, ".train.jsonl"));
            write_jsonl(&report_path, &train_report_lines(&report))?;
            Ok(json!({
                "model": a.out,
                "report": report_path,
                "epochs_run": report.epochs_run,
                "best_epoch": report.best_epoch,
                "best_val_accuracy": report.best_val_accuracy,
                "test_accuracy": report.test_accuracy,
            }))
        }
        Command::Evaluate(a) => {
            let ds = load_dataset(&a.dataset)?;
            let model = Model::<f32>::load(&a.model)?;
            let acc = |split| match evaluate(&model, &ds, split) {
                Ok(v) => Ok(Some(v)),
                Err(gnnx_core::Error::EmptyMask) => Ok(None),
                Err(e) => Err(e),
            };
            Ok(json!({ "dataset": ds.name, "arch": model.arch(), "train": acc(Split::Train)?, "val": acc(Split::Val)?, "test": acc(Split::Test)? }))
        }
        Command::Explain(a) => {
            let ds = load_dataset(&a.dataset)?;
            let model = Model::<f32>::load(&a.model)?;
            let g = GraphTensors::<f32>::from_dataset(&ds)?;
            let cfg = ExplainConfig { epochs: a.epochs, lr: a.lr, top_k_edges: a.top_k, top_k_features: a.top_k, seed: a.seed, ..Default::default() };
            let e = run_gnn_explainer(&model, &g.features, &g.adjacency, a.node, &cfg, ds.feature_names.as_deref())?;
            let summary = json!({
                "out": a.out,
                "center": e.center,
                "predicted_class": e.predicted_class,
                "top_edge": e.top_edges.first(),
                "top_feature": e.top_features.first(),
            });
            write_jsonl(&a.out, &[ExplanationLine::Explanation(e)])?;
            Ok(summary)
        }
        Command::Project(a) => {
            let ds = load_dataset(&a.dataset)?;
            let model = Model::<f32>::load(&a.model)?;
            let g = GraphTensors::<f32>::from_dataset(&ds)?;
            let emb = model.forward(&g.input(), Mode::Eval)?.embeddings.cast::<f64>();
            let p = match a.method {
                ProjectionMethod::Pca => pca_project(&emb)?,
                ProjectionMethod::Tsne => {
                    let cfg = TsneConfig { perplexity: a.perplexity, iters: a.iters, seed: a.seed, ..Default::default() };
                    tsne_project(&emb, &cfg)?
                }
            };
            write_jsonl(&a.out, &projection_lines(&p))?;
            let diag = match &p.diagnostics {
                Diagnostics::Pca { explained_variance_ratio, .. } => json!({ "explained_variance_ratio": explained_variance_ratio }),
                Diagnostics::Tsne { final_kl, .. } => json!({ "final_kl": final_kl }),
            };
            Ok(json!({ "out": a.out, "method": p.method, "num_nodes": p.coords.len(), "diagnostics": diag }))
        }
        Command::Probe(a) => {
            let script = match &a.script {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| CliError::data("io-error", format!("{}: {e}", path.display())))?;
                    let s: probe::ProbeScript = serde_json::from_str(&text)
                        .map_err(|e| CliError::data("malformed-file", format!("{}: {e}", path.display())))?;
                    s.resolve_paths(path.parent().unwrap_or(Path::new(".")))
                }
                None => probe::ProbeScript {
                    dataset: a.dataset.clone().expect("required by clap"),
                    model: a.model.clone().expect("required by clap"),
                    ops: vec![],
                    search: Some(probe::SearchDirective::FindSingleEdgeFlip),
                    watch: vec![],
                    report: a.out.clone().expect("required by clap"),
                },
            };
            let report = a.out.unwrap_or_else(|| script.report.clone());
            let ds = Arc::new(load_dataset(&script.dataset)?);
            let model = Arc::new(Model::<f32>::load(&script.model)?);
            let lines = probe::run_probe(&script, ds, model)?;
            write_jsonl(&report, &lines)?;
            let last = lines.last().map(|l| serde_json::to_value(l).expect("report lines serialize"));
            Ok(json!({ "report": report, "records": lines.len(), "last": last }))
        }
        Command::Serve(a) => {
            let mut cfg = gnnx_service::ServiceConfig::default().with_env().map_err(CliError::usage)?;
            if let Some(p) = a.port {
                cfg.port = p;
            }
            if let Some(d) = a.data_dir {
                cfg.data_dir = d;
            }
            if let Some(d) = a.model_dir {
                cfg.model_dir = d;
            }
            if let Some(m) = a.max_jobs {
                cfg.max_concurrent_jobs = m;
            }
            if a.ui_dir.is_some() {
                cfg.ui_dir = a.ui_dir;
            }
            let rt = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| CliError { code: "io-error".into(), message: e.to_string(), exit: EXIT_COMPUTE })?;
            rt.block_on(gnnx_service::serve(cfg))?;
            Ok(json!({ "event": "stopped" }))
        }
        Command::Convert(ConvertCommand::Linqs { content, cites, name, out, split }) => {
            let read = |p: &PathBuf| std::fs::read_to_string(p).map_err(|e| CliError::data("io-error", format!("{}: {e}", p.display())));
            let (ds, stats) = linqs::parse_linqs(&name, &read(&content)?, &read(&cites)?, &split_spec(&split))?;
            export_dataset(&ds, &out)?;
            Ok(json!({ "out": out, "num_classes": ds.num_classes, "num_features": ds.num_features(), "stats": stats }))
        }
        Command::Convert(ConvertCommand::Synthetic { name, nodes, classes, features, edges, homophily, seed, out, split }) => {
            let cfg = CitationLikeConfig {
                name,
                num_nodes: nodes,
                num_classes: classes,
                num_features: features,
                num_edges: edges,
                homophily,
                split: split_spec(&split),
                seed,
                ..Default::default()
            };
            let ds = citation_like(&cfg)?;
            export_dataset(&ds, &out)?;
            Ok(json!({ "out": out, "num_nodes": ds.num_nodes(), "num_edges": ds.edges.len() }))
        }
    }
}

fn split_spec(a: &SplitArgs) -> SplitSpec {
    SplitSpec { train_per_class: a.train_per_class, val_size: a.val_size, test_size: a.test_size, seed: a.split_seed, ..Default::default() }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}
