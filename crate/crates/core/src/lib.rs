//! Engine for training, explaining and probing two-layer GNN node
//! classifiers: dataset container, numerics, GCN/GAT models, training,
//! GNNExplainer and attention explanations, 2D projections and editable
//! what-if sessions.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root pin the `f32` production types.

pub mod dataset;
pub mod error;
pub mod explain;
pub mod models;
pub mod numerics;
pub mod projection;
pub mod report;
pub mod scalar;
pub mod session;
pub mod synthetic;
pub mod training;

pub use dataset::{export_dataset, load_dataset, make_random_split, GraphDataset, Split, SplitKind, SplitSpec};
pub use error::{Error, Result};
pub use explain::{run_gnn_explainer, AttentionSummary, ExplainConfig, Explanation};
pub use models::{Arch, GraphInput, InferenceResult, Mode, Model, ModelConfig, ModelParams};
pub use numerics::{Matrix, SparseAdjacency};
pub use scalar::Scalar;
pub use session::{EditOp, FeatureSource, Session};
pub use training::{evaluate, train_model, TrainConfig, TrainReport};

pub type Matrix32 = Matrix<f32>;
pub type Matrix64 = Matrix<f64>;
pub type Adjacency32 = SparseAdjacency<f32>;
pub type Model32 = Model<f32>;
pub type Model64 = Model<f64>;
pub type Inference32 = InferenceResult<f32>;
