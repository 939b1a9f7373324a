use std::path::PathBuf;

use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

/// Wire form of every error response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not-found", message)
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid-request", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody { code: self.code.to_string(), message: self.message.clone() }
    }
}

/// HTTP status for an engine error code.
pub fn status_for(code: &str) -> StatusCode {
    match code {
        "invalid-node" | "invalid-node-id" | "missing-node" | "missing-edge" | "model-not-gat" => StatusCode::NOT_FOUND,
        "duplicate-edge" | "cancelled" => StatusCode::CONFLICT,
        "self-loop-rejected" | "invalid-config" | "dimension-mismatch" | "perplexity-too-large" | "degenerate-input"
        | "empty-mask" | "empty-train-mask" | "arch-mismatch" | "insufficient-class-population" | "shape-mismatch"
        | "invalid-rate" => StatusCode::UNPROCESSABLE_ENTITY,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<gnnx_core::Error> for ApiError {
    fn from(e: gnnx_core::Error) -> Self {
        Self::new(status_for(e.code()), e.code(), e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::new(r.status(), "invalid-request", r.body_text())
    }
}

impl From<PathRejection> for ApiError {
    fn from(r: PathRejection) -> Self {
        Self::bad_request(r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        Self::bad_request(r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body())).into_response()
    }
}

/// Failures that prevent the service from starting.
#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("port {port} is already in use")]
    PortInUse { port: u16 },
    #[error("directory {} does not exist", path.display())]
    MissingDir { path: PathBuf },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl ServeError {
    pub fn code(&self) -> &'static str {
        match self {
            ServeError::PortInUse { .. } => "port-in-use",
            ServeError::MissingDir { .. } => "missing-dir",
            ServeError::Io(_) => "io-error",
        }
    }
}
