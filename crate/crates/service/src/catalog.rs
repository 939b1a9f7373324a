//! Datasets and models on disk, loaded lazily and cached by path and
//! modification time.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::SystemTime;

use gnnx_core::dataset::{load_dataset, GraphDataset, Split};
use gnnx_core::models::ModelConfig;
use gnnx_core::Model32;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

pub const DATASET_EXT: &str = "gnnds";
pub const MODEL_EXT: &str = "gnnw";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub num_nodes: usize,
    pub num_edges: usize,
    pub num_features: usize,
    pub num_classes: usize,
    pub class_names: Vec<String>,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
}

impl DatasetInfo {
    fn of(name: &str, ds: &GraphDataset) -> Self {
        let count = |s| ds.mask(s).iter().filter(|&&m| m).count();
        Self {
            name: name.to_string(),
            num_nodes: ds.num_nodes(),
            num_edges: ds.edges.len(),
            num_features: ds.num_features(),
            num_classes: ds.num_classes,
            class_names: ds.class_names.clone(),
            train_size: count(Split::Train),
            val_size: count(Split::Val),
            test_size: count(Split::Test),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub name: String,
    pub config: ModelConfig,
}

/// Resource names are file stems: ASCII letters, digits, `-`, `_`, `.`,
/// not starting with a dot.
pub fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 128
        && !name.starts_with('.')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

type Cache<T> = Mutex<HashMap<PathBuf, (Option<SystemTime>, Arc<T>)>>;

pub struct Catalog {
    data_dir: PathBuf,
    model_dir: PathBuf,
    datasets: Cache<GraphDataset>,
    models: Cache<Model32>,
}

fn stems(dir: &Path, ext: &str) -> Vec<String> {
    let Ok(entries) = std::fs::read_dir(dir) else { return Vec::new() };
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .filter_map(|p| p.file_stem().and_then(|s| s.to_str()).map(str::to_string))
        .filter(|s| valid_name(s))
        .collect();
    names.sort();
    names
}

fn cached<T>(cache: &Cache<T>, path: &Path, load: impl FnOnce(&Path) -> gnnx_core::Result<T>) -> Result<Arc<T>, ApiError> {
    let mtime = std::fs::metadata(path).and_then(|m| m.modified()).ok();
    if let Some((t, v)) = cache.lock().expect("catalog lock").get(path) {
        if *t == mtime {
            return Ok(Arc::clone(v));
        }
    }
    let v = Arc::new(load(path)?);
    cache.lock().expect("catalog lock").insert(path.to_path_buf(), (mtime, Arc::clone(&v)));
    Ok(v)
}

impl Catalog {
    pub fn new(data_dir: PathBuf, model_dir: PathBuf) -> Self {
        Self { data_dir, model_dir, datasets: Mutex::default(), models: Mutex::default() }
    }

    fn path(dir: &Path, kind: &str, name: &str, ext: &str) -> Result<PathBuf, ApiError> {
        if !valid_name(name) {
            return Err(ApiError::bad_request(format!("invalid {kind} name {name:?}")));
        }
        Ok(dir.join(format!("{name}.{ext}")))
    }

    pub fn model_path(&self, name: &str) -> Result<PathBuf, ApiError> {
        Self::path(&self.model_dir, "model", name, MODEL_EXT)
    }

    pub fn dataset(&self, name: &str) -> Result<Arc<GraphDataset>, ApiError> {
        let path = Self::path(&self.data_dir, "dataset", name, DATASET_EXT)?;
        if !path.is_file() {
            return Err(ApiError::not_found(format!("no dataset named {name:?}")));
        }
        cached(&self.datasets, &path, |p| load_dataset(p))
    }

    pub fn model(&self, name: &str) -> Result<Arc<Model32>, ApiError> {
        let path = self.model_path(name)?;
        if !path.is_file() {
            return Err(ApiError::not_found(format!("no model named {name:?}")));
        }
        cached(&self.models, &path, |p| Model32::load(p))
    }

    /// Every readable dataset; unreadable files are reported on stderr and
    /// skipped.
    pub fn datasets(&self) -> Vec<DatasetInfo> {
        stems(&self.data_dir, DATASET_EXT)
            .into_iter()
            .filter_map(|name| match self.dataset(&name) {
                Ok(ds) => Some(DatasetInfo::of(&name, &ds)),
                Err(e) => {
                    eprintln!("skipping dataset {name}: {}", e.message);
                    None
                }
            })
            .collect()
    }

    pub fn models(&self) -> Vec<ModelInfo> {
        stems(&self.model_dir, MODEL_EXT)
            .into_iter()
            .filter_map(|name| match self.model(&name) {
                Ok(m) => Some(ModelInfo { name, config: m.config.clone() }),
                Err(e) => {
                    eprintln!("skipping model {name}: {}", e.message);
                    None
                }
            })
            .collect()
    }
}
