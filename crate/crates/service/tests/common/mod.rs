#![allow(dead_code)]

use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use gnnx_core::dataset::{export_dataset, SplitSpec};
use gnnx_core::models::{Arch, ModelConfig};
use gnnx_core::synthetic::{citation_like, CitationLikeConfig};
use gnnx_core::training::{train_model, TrainConfig};
use gnnx_service::{router, AppState, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::Value;
use tempfile::TempDir;
use tower::ServiceExt;

/// A 240-node synthetic dataset `toy` with trained `toy-gcn` and `toy-gat`
/// models, plus a 60-node dataset `other` with a different feature count.
pub fn fixture() -> (TempDir, ServiceConfig) {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let models = dir.path().join("models");
    std::fs::create_dir_all(&data).unwrap();
    std::fs::create_dir_all(&models).unwrap();
    let cfg = CitationLikeConfig {
        name: "toy".into(),
        num_nodes: 240,
        num_classes: 3,
        num_features: 60,
        num_edges: 500,
        words_per_node: 8,
        split: SplitSpec { train_per_class: 10, val_size: 40, test_size: 80, ..Default::default() },
        seed: 3,
        ..Default::default()
    };
    let ds = citation_like(&cfg).unwrap();
    export_dataset(&ds, data.join("toy.gnnds")).unwrap();
    let other = citation_like(&CitationLikeConfig {
        name: "other".into(),
        num_nodes: 60,
        num_features: 20,
        num_edges: 100,
        split: SplitSpec { train_per_class: 2, val_size: 10, test_size: 10, ..Default::default() },
        ..cfg.clone()
    })
    .unwrap();
    export_dataset(&other, data.join("other.gnnds")).unwrap();
    let tcfg = TrainConfig { epochs_max: 60, ..Default::default() };
    for arch in [Arch::Gcn, Arch::Gat] {
        let (m, _) = train_model::<f32>(&ds, ModelConfig::for_arch(arch, 60, 3), &tcfg).unwrap();
        m.save(models.join(format!("toy-{arch}.gnnw"))).unwrap();
    }
    let config = ServiceConfig { port: 0, data_dir: data, model_dir: models, max_concurrent_jobs: 2, ui_dir: None };
    (dir, config)
}

pub fn app(config: &ServiceConfig) -> Router {
    router(AppState::new(config.clone()))
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    raw(app, req).await
}

pub async fn raw(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).expect("JSON body") };
    (status, value)
}

/// Polls a job until it reaches a terminal state.
pub async fn wait_job(app: &Router, job: &Value) -> Value {
    let id = job["id"].as_str().unwrap().to_string();
    for _ in 0..6000 {
        let (s, v) = call(app, "GET", &format!("/jobs/{id}"), None).await;
        assert_eq!(s, StatusCode::OK);
        if matches!(v["state"].as_str(), Some("done" | "failed" | "cancelled")) {
            return v;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    panic!("job {id} did not finish");
}

pub async fn open_session(app: &Router, model: &str) -> String {
    let (s, v) = call(app, "POST", "/sessions", Some(serde_json::json!({"dataset": "toy", "model": model}))).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}
