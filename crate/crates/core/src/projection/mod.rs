//! 2D projections of node embeddings: exact PCA and exact t-SNE.

mod pca;
mod tsne;

use serde::{Deserialize, Serialize};

pub use pca::{pca_project, symmetric_eigen};
pub use tsne::{conditional_affinities, tsne_project, tsne_project_observed, TsneConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionMethod {
    Pca,
    Tsne,
}

impl std::str::FromStr for ProjectionMethod {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pca" => Ok(Self::Pca),
            "tsne" | "t-sne" => Ok(Self::Tsne),
            other => Err(crate::Error::InvalidConfig(format!("unknown projection method {other:?} (pca or tsne)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Diagnostics {
    Pca {
        explained_variance_ratio: [f64; 2],
        /// Unit principal directions in embedding space.
        components: Vec<Vec<f64>>,
    },
    Tsne {
        perplexity: f64,
        final_kl: f64,
        /// `(iteration, KL)` pairs.
        kl_trace: Vec<(usize, f64)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub method: ProjectionMethod,
    pub coords: Vec<[f64; 2]>,
    pub diagnostics: Diagnostics,
}
