use std::path::PathBuf;

use thiserror::Error;

/// Every failure the engine can report. Each variant has a stable
/// machine code (see [`Error::code`]) that the service and CLI surface.
#[derive(Debug, Error)]
pub enum Error {
    #[error("bad magic at byte 0: expected {expected:?}")]
    BadMagic { expected: &'static str },
    #[error("file truncated at byte {offset}: needed {needed} more bytes for {what}")]
    Truncated { offset: usize, needed: usize, what: &'static str },
    #[error("node {node} out of range (num_nodes = {num_nodes}) at byte {offset}")]
    IndexOutOfRange { node: u64, num_nodes: usize, offset: usize },
    #[error("node {node} appears in more than one split mask")]
    OverlappingMasks { node: usize },
    #[error("malformed container at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("class {class} ({name}) has only {available} nodes, {required} needed")]
    InsufficientClassPopulation { class: usize, name: String, available: usize, required: usize },
    #[error("io error on {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid node id {node} (num_nodes = {num_nodes})")]
    InvalidNodeId { node: usize, num_nodes: usize },
    #[error("softmax group {group} is empty")]
    EmptyGroup { group: usize },
    #[error("dropout rate {rate} outside [0, 1)")]
    InvalidRate { rate: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("loss is not deterministic: two evaluations gave {first} and {second}")]
    NondeterministicLoss { first: f64, second: f64 },
    #[error("architecture mismatch: expected {expected}, file holds {found}")]
    ArchMismatch { expected: String, found: String },
    #[error("training mask is empty")]
    EmptyTrainMask,
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("evaluation mask is empty")]
    EmptyMask,
    #[error("invalid node {node}")]
    InvalidNode { node: usize },
    #[error("non-finite explainer loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("attention is only available for GAT models")]
    ModelNotGat,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("perplexity {perplexity} too large for {rows} rows (must be < {limit})")]
    PerplexityTooLarge { perplexity: f64, rows: usize, limit: f64 },
    #[error("dimension mismatch: dataset has {dataset} features, model expects {model}")]
    DimensionMismatch { dataset: usize, model: usize },
    #[error("edge ({u}, {v}) already exists")]
    DuplicateEdge { u: usize, v: usize },
    #[error("edge ({u}, {v}) does not exist")]
    MissingEdge { u: usize, v: usize },
    #[error("node {node} does not exist")]
    MissingNode { node: usize },
    #[error("self-loop ({node}, {node}) rejected")]
    SelfLoopRejected { node: usize },
    #[error("operation cancelled")]
    Cancelled,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::BadMagic { .. } => "bad-magic",
            Error::Truncated { .. } => "truncated-file",
            Error::IndexOutOfRange { .. } => "index-out-of-range",
            Error::OverlappingMasks { .. } => "overlapping-masks",
            Error::Malformed { .. } => "malformed-file",
            Error::InsufficientClassPopulation { .. } => "insufficient-class-population",
            Error::Io { .. } => "io-error",
            Error::InvalidNodeId { .. } => "invalid-node-id",
            Error::EmptyGroup { .. } => "empty-group",
            Error::InvalidRate { .. } => "invalid-rate",
            Error::ShapeMismatch(_) => "shape-mismatch",
            Error::NondeterministicLoss { .. } => "nondeterministic-loss",
            Error::ArchMismatch { .. } => "arch-mismatch",
            Error::EmptyTrainMask => "empty-train-mask",
            Error::Divergence { .. } => "divergence",
            Error::EmptyMask => "empty-mask",
            Error::InvalidNode { .. } => "invalid-node",
            Error::NonFiniteLoss { .. } => "non-finite-loss",
            Error::ModelNotGat => "model-not-gat",
            Error::DegenerateInput(_) => "degenerate-input",
            Error::PerplexityTooLarge { .. } => "perplexity-too-large",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::DuplicateEdge { .. } => "duplicate-edge",
            Error::MissingEdge { .. } => "missing-edge",
            Error::MissingNode { .. } => "missing-node",
            Error::SelfLoopRejected { .. } => "self-loop-rejected",
            Error::Cancelled => "cancelled",
            Error::InvalidConfig(_) => "invalid-config",
        }
    }

    /// Data errors are problems with inputs (files, ids, edits); everything
    /// else is a compute failure.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::BadMagic { .. }
                | Error::Truncated { .. }
                | Error::IndexOutOfRange { .. }
                | Error::OverlappingMasks { .. }
                | Error::Malformed { .. }
                | Error::InsufficientClassPopulation { .. }
                | Error::Io { .. }
                | Error::InvalidNodeId { .. }
                | Error::ArchMismatch { .. }
                | Error::InvalidNode { .. }
                | Error::DimensionMismatch { .. }
                | Error::DuplicateEdge { .. }
                | Error::MissingEdge { .. }
                | Error::MissingNode { .. }
                | Error::SelfLoopRejected { .. }
                | Error::EmptyTrainMask
                | Error::EmptyMask
                | Error::InvalidConfig(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
