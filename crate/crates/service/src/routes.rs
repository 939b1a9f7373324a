use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use axum::extract::{FromRequest, FromRequestParts, Request, State};
use axum::http::{Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use gnnx_core::explain::{extract_attention, run_gnn_explainer_observed, AttentionSummary, Explanation};
use gnnx_core::models::Arch;
use gnnx_core::projection::{pca_project, tsne_project_observed, Diagnostics, ProjectionMethod, ProjectionResult, TsneConfig};
use gnnx_core::report::{train_report_lines, write_jsonl};
use gnnx_core::session::{EditOutcome, NeighborInfo};
use gnnx_core::training::{train_model_observed, EpochRecord};
use gnnx_core::{EditOp, ExplainConfig, ModelConfig, Session, TrainConfig, TrainReport};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::catalog::{valid_name, DatasetInfo, ModelInfo};
use crate::error::ApiError;
use crate::jobs::{JobKind, JobView};
use crate::state::{AppState, SessionCell};

type AppResult<T> = Result<T, ApiError>;
type Shared = State<Arc<AppState>>;

/// JSON body extractor whose rejections are [`ApiError`]s.
#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
pub struct Body<T>(pub T);

/// Path extractor whose rejections are [`ApiError`]s.
#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Path), rejection(ApiError))]
pub struct Params<T>(pub T);

/// Query extractor whose rejections are [`ApiError`]s.
#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Query), rejection(ApiError))]
pub struct Query<T>(pub T);

/// The fixed endpoint set as `(method, path)` pairs.
pub fn route_catalog() -> &'static [(&'static str, &'static str)] {
    &[
        ("GET", "/datasets"),
        ("GET", "/models"),
        ("POST", "/train"),
        ("GET", "/jobs/{id}"),
        ("DELETE", "/jobs/{id}"),
        ("POST", "/sessions"),
        ("DELETE", "/sessions/{id}"),
        ("POST", "/sessions/{id}/reset"),
        ("GET", "/sessions/{id}/graph"),
        ("GET", "/sessions/{id}/nodes/{nid}"),
        ("GET", "/sessions/{id}/embeddings"),
        ("POST", "/sessions/{id}/explain"),
        ("GET", "/sessions/{id}/attention/{nid}"),
        ("POST", "/sessions/{id}/edits"),
    ]
}

pub fn router(state: Arc<AppState>) -> Router {
    let ui = state.config.ui_dir.clone().filter(|d| d.is_dir());
    let mut app = Router::new()
        .route("/datasets", get(list_datasets))
        .route("/models", get(list_models))
        .route("/train", post(start_training))
        .route("/jobs/{id}", get(job_status).delete(cancel_job))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", delete(delete_session))
        .route("/sessions/{id}/reset", post(reset_session))
        .route("/sessions/{id}/graph", get(graph))
        .route("/sessions/{id}/nodes/{nid}", get(node_info))
        .route("/sessions/{id}/embeddings", get(embeddings))
        .route("/sessions/{id}/explain", post(explain))
        .route("/sessions/{id}/attention/{nid}", get(attention))
        .route("/sessions/{id}/edits", post(edit));
    app = match ui {
        Some(dir) => app.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => app.route("/", get(index)).fallback(not_found),
    };
    app.method_not_allowed_fallback(method_not_allowed).layer(middleware::from_fn(log_request)).with_state(state)
}

/// One JSON line per request on stdout.
async fn log_request(req: Request, next: Next) -> Response {
    let (method, path) = (req.method().clone(), req.uri().path().to_string());
    let start = Instant::now();
    let res = next.run(req).await;
    let ts = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let line = serde_json::json!({
        "ts": ts,
        "method": method.as_str(),
        "path": path,
        "status": res.status().as_u16(),
        "ms": start.elapsed().as_secs_f64() * 1e3,
    });
    println!("{line}");
    res
}

async fn not_found(method: Method, uri: axum::http::Uri) -> ApiError {
    ApiError::not_found(format!("no route for {method} {}", uri.path()))
}

async fn method_not_allowed(method: Method, uri: axum::http::Uri) -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method-not-allowed", format!("{method} is not supported on {}", uri.path()))
}

async fn index() -> Json<Value> {
    let routes: Vec<String> = route_catalog().iter().map(|(m, p)| format!("{m} {p}")).collect();
    Json(serde_json::json!({ "service": "gnnx", "routes": routes }))
}

/// Runs synchronous engine work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> AppResult<T> + Send + 'static) -> AppResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

fn to_value<T: Serialize>(v: &T) -> AppResult<Value> {
    serde_json::to_value(v).map_err(|e| ApiError::internal(e.to_string()))
}

// ---- catalogs and training ----

#[derive(Serialize, Deserialize)]
pub struct DatasetList {
    pub datasets: Vec<DatasetInfo>,
}

#[derive(Serialize, Deserialize)]
pub struct ModelList {
    pub models: Vec<ModelInfo>,
}

async fn list_datasets(State(st): Shared) -> AppResult<Json<DatasetList>> {
    blocking(move || Ok(Json(DatasetList { datasets: st.catalog.datasets() }))).await
}

async fn list_models(State(st): Shared) -> AppResult<Json<ModelList>> {
    blocking(move || Ok(Json(ModelList { models: st.catalog.models() }))).await
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainRequest {
    pub dataset: String,
    pub arch: Arch,
    #[serde(default)]
    pub config: TrainConfig,
    /// Overrides the architecture's default hidden width.
    #[serde(default)]
    pub hidden_dim: Option<usize>,
    #[serde(default)]
    pub dropout_rate: Option<f64>,
    /// Output model name; defaults to `<dataset>-<arch>-s<seed>`.
    #[serde(default)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainResult {
    pub model: String,
    pub report: TrainReport,
}

async fn start_training(State(st): Shared, Body(req): Body<TrainRequest>) -> AppResult<(StatusCode, Json<JobView>)> {
    req.config.validate()?;
    let name = req.name.clone().unwrap_or_else(|| format!("{}-{}-s{}", req.dataset, req.arch, req.config.seed));
    if !valid_name(&name) {
        return Err(ApiError::bad_request(format!("invalid model name {name:?}")));
    }
    let path = st.catalog.model_path(&name)?;
    let ds = {
        let st = Arc::clone(&st);
        let dataset = req.dataset.clone();
        blocking(move || st.catalog.dataset(&dataset)).await?
    };
    let mut mcfg = ModelConfig::for_arch(req.arch, ds.num_features(), ds.num_classes).with_seed(req.config.seed);
    if let Some(h) = req.hidden_dim {
        mcfg.hidden_dim = h;
    }
    if let Some(p) = req.dropout_rate {
        mcfg.dropout_rate = p;
    }
    mcfg.validate()?;
    let report_path = path.with_extension("train.jsonl");
    let job = st.jobs.submit(JobKind::Train, move |h| {
        let mut observer = |r: &EpochRecord, max: usize| h.observe(r.epoch + 1, max);
        let (model, report) = train_model_observed::<f32>(&ds, mcfg, &req.config, &mut observer)?;
        model.save(&path)?;
        write_jsonl(&report_path, &train_report_lines(&report))?;
        to_value(&TrainResult { model: name, report })
    });
    Ok((StatusCode::ACCEPTED, Json(job)))
}

async fn job_status(State(st): Shared, Params(id): Params<String>) -> AppResult<Json<JobView>> {
    st.jobs.get(&id).map(Json).ok_or_else(|| ApiError::not_found(format!("no job {id:?}")))
}

async fn cancel_job(State(st): Shared, Params(id): Params<String>) -> AppResult<Json<JobView>> {
    st.jobs.cancel(&id).map(Json).ok_or_else(|| ApiError::not_found(format!("no job {id:?}")))
}

// ---- sessions ----

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSession {
    pub dataset: String,
    pub model: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub graph_version: u64,
    pub dataset: String,
    pub model: String,
    pub arch: Arch,
    pub class_names: Vec<String>,
}

async fn create_session(State(st): Shared, Body(req): Body<CreateSession>) -> AppResult<(StatusCode, Json<SessionCreated>)> {
    blocking(move || {
        let ds = st.catalog.dataset(&req.dataset)?;
        let model = st.catalog.model(&req.model)?;
        let arch = model.arch();
        let class_names = ds.class_names.clone();
        let session = Session::create(uuid::Uuid::new_v4().simple().to_string(), ds, model)?;
        let graph_version = session.graph_version();
        let session_id = st.insert_session(session);
        Ok((
            StatusCode::CREATED,
            Json(SessionCreated { session_id, graph_version, dataset: req.dataset, model: req.model, arch, class_names }),
        ))
    })
    .await
}

async fn delete_session(State(st): Shared, Params(id): Params<String>) -> AppResult<StatusCode> {
    st.remove_session(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

/// Runs `f` with the session write lock on the blocking pool.
async fn with_session_mut<T: Send + 'static>(
    cell: SessionCell,
    f: impl FnOnce(&mut Session) -> AppResult<T> + Send + 'static,
) -> AppResult<T> {
    blocking(move || {
        let mut guard = cell.write().map_err(|_| ApiError::internal("session lock poisoned"))?;
        f(&mut guard)
    })
    .await
}

async fn with_session<T: Send + 'static>(
    cell: SessionCell,
    f: impl FnOnce(&Session) -> AppResult<T> + Send + 'static,
) -> AppResult<T> {
    blocking(move || {
        let guard = cell.read().map_err(|_| ApiError::internal("session lock poisoned"))?;
        f(&guard)
    })
    .await
}

async fn reset_session(State(st): Shared, Params(id): Params<String>) -> AppResult<Json<EditOutcome>> {
    with_session_mut(st.session(&id)?, |s| Ok(Json(s.reset()?))).await
}

async fn edit(State(st): Shared, Params(id): Params<String>, Body(op): Body<EditOp>) -> AppResult<Json<EditOutcome>> {
    with_session_mut(st.session(&id)?, move |s| Ok(Json(s.apply_edit(op)?))).await
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: usize,
    pub true_class: Option<usize>,
    pub predicted_class: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub u: usize,
    pub v: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphView {
    pub graph_version: u64,
    pub arch: Arch,
    pub class_names: Vec<String>,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

async fn graph(State(st): Shared, Params(id): Params<String>) -> AppResult<Json<GraphView>> {
    with_session(st.session(&id)?, |s| {
        let snap = s.snapshot();
        let g = s.graph();
        let nodes = (0..g.num_slots())
            .filter(|&i| g.exists(i))
            .map(|i| GraphNode { id: i, true_class: s.true_class(i), predicted_class: snap.inference.predicted[i] })
            .collect();
        let edges = g.edges.iter().map(|&(u, v)| GraphEdge { u, v }).collect();
        Ok(Json(GraphView {
            graph_version: snap.version,
            arch: s.model().arch(),
            class_names: s.dataset().class_names.clone(),
            nodes,
            edges,
        }))
    })
    .await
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureValue {
    pub index: usize,
    pub name: Option<String>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeView {
    pub graph_version: u64,
    pub id: usize,
    pub true_class: Option<usize>,
    pub predicted_class: usize,
    /// Class probabilities under the current graph.
    pub probabilities: Vec<f64>,
    /// Non-zero input features.
    pub features: Vec<FeatureValue>,
    pub neighbors: Vec<NeighborInfo>,
}

async fn node_info(State(st): Shared, Params((id, nid)): Params<(String, usize)>) -> AppResult<Json<NodeView>> {
    with_session(st.session(&id)?, move |s| {
        let neighbors = s.neighbor_summary(nid)?.neighbors;
        let snap = s.snapshot();
        let names = s.dataset().feature_names.as_deref();
        let features = snap
            .features
            .row(nid)
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(index, v)| FeatureValue { index, name: names.and_then(|n| n.get(index).cloned()), value: *v as f64 })
            .collect();
        Ok(Json(NodeView {
            graph_version: snap.version,
            id: nid,
            true_class: s.true_class(nid),
            predicted_class: snap.inference.predicted[nid],
            probabilities: snap.inference.log_probs.row(nid).iter().map(|lp| (*lp as f64).exp()).collect(),
            features,
            neighbors,
        }))
    })
    .await
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionView {
    pub graph_version: u64,
    pub attention: AttentionSummary,
}

async fn attention(State(st): Shared, Params((id, nid)): Params<(String, usize)>) -> AppResult<Json<AttentionView>> {
    with_session(st.session(&id)?, move |s| {
        if !s.graph().exists(nid) {
            return Err(gnnx_core::Error::MissingNode { node: nid }.into());
        }
        let snap = s.snapshot();
        let attention = extract_attention(&snap.inference, &snap.adjacency, nid)?;
        Ok(Json(AttentionView { graph_version: snap.version, attention }))
    })
    .await
}

// ---- explanations and projections ----

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplainRequest {
    pub node: usize,
    /// Partial overrides of the default explainer configuration.
    #[serde(default)]
    pub config: ExplainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainResult {
    pub graph_version: u64,
    pub explanation: Explanation,
}

async fn explain(
    State(st): Shared,
    Params(id): Params<String>,
    Body(req): Body<ExplainRequest>,
) -> AppResult<(StatusCode, Json<JobView>)> {
    req.config.validate()?;
    let cell = st.session(&id)?;
    let (snap, model, names, cached) = with_session(Arc::clone(&cell), move |s| {
        if !s.graph().exists(req.node) {
            return Err(gnnx_core::Error::InvalidNode { node: req.node }.into());
        }
        let cached = s.cached_explanation(s.graph_version(), req.node, &req.config);
        Ok((s.snapshot(), Arc::clone(s.model()), s.dataset().feature_names.clone(), cached))
    })
    .await?;
    if let Some(e) = cached {
        let result = to_value(&ExplainResult { graph_version: snap.version, explanation: (*e).clone() })?;
        return Ok((StatusCode::ACCEPTED, Json(st.jobs.completed(JobKind::Explain, result))));
    }
    let job = st.jobs.submit(JobKind::Explain, move |h| {
        let e = run_gnn_explainer_observed(
            &model,
            &snap.features,
            &snap.adjacency,
            req.node,
            &req.config,
            names.as_deref(),
            &mut |i, n| h.observe(i, n),
        )?;
        let e = Arc::new(e);
        if let Ok(mut s) = cell.write() {
            s.store_explanation(snap.version, req.node, &req.config, Arc::clone(&e));
        }
        to_value(&ExplainResult { graph_version: snap.version, explanation: (*e).clone() })
    });
    Ok((StatusCode::ACCEPTED, Json(job)))
}

#[derive(Debug, Clone, Deserialize)]
pub struct EmbeddingQuery {
    pub method: ProjectionMethod,
    pub perplexity: Option<f64>,
    pub iters: Option<usize>,
    pub seed: Option<u64>,
}

/// Projection of the live nodes' embeddings; `coords[k]` belongs to node
/// `ids[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionView {
    pub graph_version: u64,
    pub method: ProjectionMethod,
    pub ids: Vec<usize>,
    pub coords: Vec<[f64; 2]>,
    pub diagnostics: Diagnostics,
}

impl ProjectionView {
    fn new(graph_version: u64, ids: Vec<usize>, p: &ProjectionResult) -> Self {
        Self { graph_version, method: p.method, ids, coords: p.coords.clone(), diagnostics: p.diagnostics.clone() }
    }
}

async fn embeddings(State(st): Shared, Params(id): Params<String>, Query(q): Query<EmbeddingQuery>) -> AppResult<Response> {
    let cell = st.session(&id)?;
    match q.method {
        ProjectionMethod::Pca => {
            let view = with_session_mut(cell, |s| {
                let snap = s.snapshot();
                let (ids, rows) = snap.live_embeddings();
                let p = match s.cached_projection(snap.version, ProjectionMethod::Pca, "") {
                    Some(p) => p,
                    None => {
                        let p = Arc::new(pca_project(&rows)?);
                        s.store_projection(snap.version, ProjectionMethod::Pca, "", Arc::clone(&p));
                        p
                    }
                };
                Ok(ProjectionView::new(snap.version, ids, &p))
            })
            .await?;
            Ok(Json(view).into_response())
        }
        ProjectionMethod::Tsne => {
            let defaults = TsneConfig::default();
            let cfg = TsneConfig {
                perplexity: q.perplexity.unwrap_or(defaults.perplexity),
                iters: q.iters.unwrap_or(defaults.iters),
                seed: q.seed.unwrap_or(defaults.seed),
                ..defaults
            };
            let key = serde_json::to_string(&cfg).map_err(|e| ApiError::internal(e.to_string()))?;
            let (snap, cached) = with_session(Arc::clone(&cell), {
                let key = key.clone();
                move |s| Ok((s.snapshot(), s.cached_projection(s.graph_version(), ProjectionMethod::Tsne, &key)))
            })
            .await?;
            let (ids, rows) = snap.live_embeddings();
            cfg.validate(rows.rows())?;
            let job = match cached {
                Some(p) => st.jobs.completed(JobKind::Tsne, to_value(&ProjectionView::new(snap.version, ids, &p))?),
                None => st.jobs.submit(JobKind::Tsne, move |h| {
                    let p = Arc::new(tsne_project_observed(&rows, &cfg, &mut |i, n| h.observe(i, n))?);
                    if let Ok(mut s) = cell.write() {
                        s.store_projection(snap.version, ProjectionMethod::Tsne, &key, Arc::clone(&p));
                    }
                    to_value(&ProjectionView::new(snap.version, ids, &p))
                }),
            };
            Ok((StatusCode::ACCEPTED, Json(job)).into_response())
        }
    }
}
