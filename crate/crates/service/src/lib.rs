//! HTTP/JSON API over the gnnx engine: dataset and model catalogs, training
//! jobs, what-if sessions, explanations and projections. Long operations run
//! as polled, cancellable jobs; every response derived from a session
//! carries its `graph_version`.

mod catalog;
mod config;
mod error;
mod jobs;
mod routes;
mod state;

use std::net::SocketAddr;

pub use catalog::{valid_name, DatasetInfo, ModelInfo, DATASET_EXT, MODEL_EXT};
pub use config::ServiceConfig;
pub use error::{status_for, ApiError, ErrorBody, ServeError};
pub use jobs::{JobHandle, JobKind, JobState, JobView, Jobs};
pub use routes::{
    route_catalog, router, AttentionView, CreateSession, DatasetList, EmbeddingQuery, ExplainRequest, ExplainResult,
    FeatureValue, GraphEdge, GraphNode, GraphView, ModelList, NodeView, ProjectionView, SessionCreated, TrainRequest,
    TrainResult,
};
pub use state::AppState;

/// Checks directories and binds the listener; returns the bound address and
/// the ready-to-serve application.
pub async fn bind(config: ServiceConfig) -> Result<(tokio::net::TcpListener, axum::Router), ServeError> {
    for dir in [&config.data_dir, &config.model_dir] {
        if !dir.is_dir() {
            return Err(ServeError::MissingDir { path: dir.clone() });
        }
    }
    let addr = SocketAddr::from(([0, 0, 0, 0], config.port));
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => ServeError::PortInUse { port: config.port },
        _ => ServeError::Io(e),
    })?;
    Ok((listener, router(AppState::new(config))))
}

/// Serves until the process is stopped. Prints one JSON line with the bound
/// address before accepting requests.
pub async fn serve(config: ServiceConfig) -> Result<(), ServeError> {
    let (listener, app) = bind(config).await?;
    let addr = listener.local_addr()?;
    println!("{}", serde_json::json!({ "event": "listening", "addr": addr.to_string(), "port": addr.port() }));
    axum::serve(listener, app).await?;
    Ok(())
}
