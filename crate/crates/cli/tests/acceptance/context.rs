use std::cell::RefCell;
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use gnnx_core::dataset::{load_dataset, GraphDataset, SplitSpec};
use gnnx_core::numerics::build_normalized_adjacency;
use gnnx_core::explain::extract_computation_subgraph;
use gnnx_core::synthetic::{citation_like, CitationLikeConfig};
use gnnx_core::{train_model, Arch, GraphInput, Mode, Model32, ModelConfig, TrainConfig, TrainReport};

pub enum Verdict {
    Pass(String),
    Fail(String),
    /// The criterion's dataset is unavailable; `proxy` summarizes the same
    /// procedure on synthetic data.
    Blocked { reason: String, proxy: Option<String> },
}

impl Verdict {
    pub fn check(ok: bool, detail: String) -> Self {
        if ok {
            Verdict::Pass(detail)
        } else {
            Verdict::Fail(detail)
        }
    }
}

pub struct Trained {
    pub model: Arc<Model32>,
    pub report: TrainReport,
    pub elapsed: Duration,
}

/// Shared state across criteria: located datasets and trained models, so
/// Cora is trained once even though four criteria use it.
pub struct Ctx {
    pub data_dir: PathBuf,
    pub work: tempfile::TempDir,
    datasets: RefCell<HashMap<String, Arc<GraphDataset>>>,
    models: RefCell<HashMap<(String, Arch), Arc<Trained>>>,
}

pub const CORA: &str = "cora";
pub const CITESEER: &str = "citeseer";

impl Ctx {
    pub fn new() -> Self {
        let data_dir = std::env::var_os("GNNX_DATA_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).ancestors().nth(2).expect("workspace root").join("data"));
        let data_dir = data_dir.canonicalize().unwrap_or(data_dir);
        Self { data_dir, work: tempfile::tempdir().expect("temp dir"), datasets: Default::default(), models: Default::default() }
    }

    pub fn real_path(&self, name: &str) -> PathBuf {
        self.data_dir.join(format!("{name}.gnnds"))
    }

    /// The named benchmark container, or the reason it is unavailable.
    pub fn real(&self, name: &str) -> Result<Arc<GraphDataset>, String> {
        if let Some(ds) = self.datasets.borrow().get(name) {
            return Ok(Arc::clone(ds));
        }
        let path = self.real_path(name);
        if !path.exists() {
            return Err(format!("{} not found (set GNNX_DATA_DIR; see scripts/convert_planetoid.py)", path.display()));
        }
        let ds = Arc::new(load_dataset(&path).map_err(|e| format!("{}: {e}", path.display()))?);
        self.datasets.borrow_mut().insert(name.to_string(), Arc::clone(&ds));
        Ok(ds)
    }

    /// Synthetic stand-in with the benchmark's sizes.
    pub fn proxy(&self, name: &str) -> Arc<GraphDataset> {
        let key = format!("proxy-{name}");
        if let Some(ds) = self.datasets.borrow().get(&key) {
            return Arc::clone(ds);
        }
        let cfg = match name {
            CITESEER => CitationLikeConfig {
                name: key.clone(),
                num_nodes: 3327,
                num_classes: 6,
                num_features: 3703,
                num_edges: 4552,
                homophily: 0.74,
                words_per_node: 32,
                seed: 2,
                ..Default::default()
            },
            _ => CitationLikeConfig { name: key.clone(), seed: 1, ..Default::default() },
        };
        let ds = Arc::new(citation_like(&CitationLikeConfig { split: SplitSpec::default(), ..cfg }).expect("synthetic dataset"));
        self.datasets.borrow_mut().insert(key, Arc::clone(&ds));
        ds
    }

    /// Model trained with the default configuration (seed 0), memoized per
    /// dataset name and architecture.
    pub fn trained(&self, ds: &GraphDataset, arch: Arch) -> Arc<Trained> {
        let key = (ds.name.clone(), arch);
        if let Some(t) = self.models.borrow().get(&key) {
            return Arc::clone(t);
        }
        let start = Instant::now();
        let cfg = ModelConfig::for_arch(arch, ds.num_features(), ds.num_classes);
        let (model, report) = train_model::<f32>(ds, cfg, &TrainConfig::default()).expect("training runs");
        let t = Arc::new(Trained { model: Arc::new(model), report, elapsed: start.elapsed() });
        self.models.borrow_mut().insert(key, Arc::clone(&t));
        t
    }
}

/// Log-probabilities of `node` after deleting `removed` (if any) from the
/// graph, evaluated on the node's 2-hop computation subgraph.
pub fn log_probs_without(ds: &GraphDataset, model: &Model32, node: usize, removed: Option<(usize, usize)>) -> Vec<f64> {
    let kept: Vec<(usize, usize)> = ds.edges.iter().copied().filter(|&e| Some(e) != removed).collect();
    let adj = build_normalized_adjacency::<f32>(&kept, ds.num_nodes()).expect("adjacency");
    let (sub, sub_adj) = extract_computation_subgraph(&adj, node, 2).expect("subgraph");
    let x = ds.features.select_rows(&sub.nodes);
    let out = model.forward(&GraphInput::new(&x, &sub_adj), Mode::Eval).expect("forward");
    out.log_probs.row(sub.center_local()).iter().map(|&v| v as f64).collect()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Paired t statistic of `v` against zero.
pub fn t_stat(v: &[f64]) -> f64 {
    let m = mean(v);
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0);
    m / (var / v.len() as f64).sqrt()
}
