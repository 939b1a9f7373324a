use std::path::PathBuf;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    /// 0 binds an ephemeral port.
    pub port: u16,
    /// Holds `<name>.gnnds` dataset containers.
    pub data_dir: PathBuf,
    /// Holds `<name>.gnnw` weights; trained models are written here.
    pub model_dir: PathBuf,
    pub max_concurrent_jobs: usize,
    /// Built UI bundle served at `/`, if any.
    pub ui_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { port: 8050, data_dir: "data".into(), model_dir: "models".into(), max_concurrent_jobs: 2, ui_dir: None }
    }
}

impl ServiceConfig {
    /// Applies `GNNX_PORT`, `GNNX_DATA_DIR`, `GNNX_MODEL_DIR`, `GNNX_UI_DIR`
    /// and `GNNX_MAX_JOBS` on top of `self`.
    pub fn with_env(mut self) -> Result<Self, String> {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        if let Some(p) = var("GNNX_PORT") {
            self.port = p.parse().map_err(|_| format!("GNNX_PORT={p:?} is not a port number"))?;
        }
        if let Some(d) = var("GNNX_DATA_DIR") {
            self.data_dir = d.into();
        }
        if let Some(d) = var("GNNX_MODEL_DIR") {
            self.model_dir = d.into();
        }
        if let Some(d) = var("GNNX_UI_DIR") {
            self.ui_dir = Some(d.into());
        }
        if let Some(j) = var("GNNX_MAX_JOBS") {
            self.max_concurrent_jobs = j.parse().map_err(|_| format!("GNNX_MAX_JOBS={j:?} is not a count"))?;
        }
        Ok(self)
    }
}
