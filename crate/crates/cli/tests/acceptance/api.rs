//! Both case-study flows as HTTP sequences against `gnnx serve`, plus
//! invalid-input fuzzing. No UI directory is configured.

use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use gnnx_core::dataset::{load_dataset, SplitSpec};
use gnnx_core::explain::normalized_top_k_entropy;
use gnnx_core::synthetic::{citation_like, CitationLikeConfig};
use gnnx_core::{export_dataset, Model32};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::context::{Ctx, Verdict, CITESEER, CORA};

struct Server {
    child: Child,
    base: String,
    http: reqwest::blocking::Client,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Server {
    fn start(data: &Path, models: &Path) -> Result<Self, String> {
        let mut child = Command::new(env!("CARGO_BIN_EXE_gnnx"))
            .args(["serve", "--port", "0", "--max-jobs", "2"])
            .arg("--data-dir")
            .arg(data)
            .arg("--model-dir")
            .arg(models)
            .env_remove("GNNX_UI_DIR")
            .env_remove("GNNX_PORT")
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| e.to_string())?;
        let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
        let port = loop {
            let Some(Ok(line)) = lines.next() else {
                let _ = child.kill();
                return Err("server exited before listening".into());
            };
            if let Ok(v) = serde_json::from_str::<Value>(&line) {
                if v["event"] == "listening" {
                    break v["port"].as_u64().unwrap();
                }
            }
        };
        // keep draining the request log
        std::thread::spawn(move || lines.for_each(drop));
        let http = reqwest::blocking::Client::builder().timeout(Duration::from_secs(900)).build().map_err(|e| e.to_string())?;
        Ok(Self { child, base: format!("http://127.0.0.1:{port}"), http })
    }

    fn send(&self, method: &str, path: &str, body: Option<String>) -> (u16, Value) {
        let mut req = self.http.request(method.parse().unwrap(), format!("{}{path}", self.base));
        if let Some(b) = body {
            req = req.header("content-type", "application/json").body(b);
        }
        let res = req.send().expect("request completes");
        let status = res.status().as_u16();
        let bytes = res.bytes().unwrap();
        (status, if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or(Value::String("<non-JSON body>".into())) })
    }

    fn call(&self, method: &str, path: &str, body: Option<Value>) -> (u16, Value) {
        self.send(method, path, body.map(|b| b.to_string()))
    }

    fn wait(&self, job: &Value) -> Value {
        let id = job["id"].as_str().expect("job id").to_string();
        let start = Instant::now();
        loop {
            let (_, v) = self.call("GET", &format!("/jobs/{id}"), None);
            if matches!(v["state"].as_str(), Some("done" | "failed" | "cancelled")) || start.elapsed() > Duration::from_secs(900) {
                return v;
            }
            std::thread::sleep(Duration::from_millis(50));
        }
    }

    fn alive(&mut self) -> bool {
        self.child.try_wait().map(|s| s.is_none()).unwrap_or(false)
    }
}

/// Failure with the step that broke.
macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn train(s: &Server, dataset: &str, arch: &str, name: &str) -> Result<(), String> {
    let (st, job) = s.call("POST", "/train", Some(json!({ "dataset": dataset, "arch": arch, "name": name })));
    ensure!(st == 202, "POST /train {dataset} {arch}: {st} {job}");
    let done = s.wait(&job);
    ensure!(done["state"] == "done" && done["result"]["model"] == name, "train job ended {done}");
    Ok(())
}

fn open(s: &Server, dataset: &str, model: &str) -> Result<String, String> {
    let (st, v) = s.call("POST", "/sessions", Some(json!({ "dataset": dataset, "model": model })));
    ensure!(st == 201, "POST /sessions: {st} {v}");
    Ok(v["session_id"].as_str().unwrap().to_string())
}

fn explain(s: &Server, sid: &str, node: usize) -> Result<Value, String> {
    let (st, job) = s.call("POST", &format!("/sessions/{sid}/explain"), Some(json!({ "node": node })));
    ensure!(st == 202 || st == 200, "POST explain: {st} {job}");
    let done = s.wait(&job);
    ensure!(done["state"] == "done", "explain job ended {done}");
    Ok(done["result"]["explanation"].clone())
}

/// Select a misclassified node, inspect it, explain it, delete the edge the
/// probe found and watch the prediction become correct, then undo.
fn flow_1(s: &Server, root: &Path, dataset: &str) -> Result<String, String> {
    train(s, dataset, "gcn", "cs1-gcn")?;
    let (st, models) = s.call("GET", "/models", None);
    ensure!(st == 200 && models.to_string().contains("cs1-gcn"), "GET /models: {models}");

    let ds = Arc::new(load_dataset(root.join("data").join(format!("{dataset}.gnnds"))).map_err(|e| e.to_string())?);
    let model = Model32::load(root.join("models/cs1-gcn.gnnw")).map_err(|e| e.to_string())?;
    let scan = gnnx_cli::probe::find_single_edge_flip(&ds, &model).map_err(|e| e.to_string())?;
    let hit = scan.hit.ok_or("probe found no prediction-correcting single-edge removal")?;
    let (node, (u, v)) = (hit.node, hit.removed_edge);
    let other = if u == node { v } else { u };

    let sid = open(s, dataset, "cs1-gcn")?;
    let (st, graph) = s.call("GET", &format!("/sessions/{sid}/graph"), None);
    ensure!(st == 200, "GET graph: {st}");
    let shown = graph["nodes"].as_array().unwrap().iter().find(|n| n["id"] == node).cloned().unwrap_or_default();
    ensure!(shown["predicted_class"] == hit.old_prediction && shown["true_class"] == hit.true_class, "graph view of {node}: {shown}");

    let (st, info) = s.call("GET", &format!("/sessions/{sid}/nodes/{node}"), None);
    ensure!(st == 200 && info["neighbors"].as_array().unwrap().iter().any(|n| n["id"] == other), "GET node {node}: {st} {info}");
    let e = explain(s, &sid, node)?;
    ensure!(e["center"] == node && e["predicted_class"] == hit.old_prediction, "explanation {e}");

    let (st, out) = s.call("POST", &format!("/sessions/{sid}/edits"), Some(json!({ "op": "remove_edge", "u": u, "v": v })));
    ensure!(st == 200, "remove_edge: {st} {out}");
    let changed = out["changed_predictions"].as_array().unwrap();
    ensure!(changed.iter().any(|c| c["id"] == node && c["new"] == hit.true_class), "edit outcome lacks the flip: {out}");
    let (_, info) = s.call("GET", &format!("/sessions/{sid}/nodes/{node}"), None);
    ensure!(info["predicted_class"] == hit.true_class, "node after edit: {info}");

    let (st, _) = s.call("POST", &format!("/sessions/{sid}/edits"), Some(json!({ "op": "add_edge", "u": u, "v": v })));
    let (_, info) = s.call("GET", &format!("/sessions/{sid}/nodes/{node}"), None);
    ensure!(st == 200 && info["predicted_class"] == hit.old_prediction, "undo did not restore prediction: {info}");
    let (st, _) = s.call("POST", &format!("/sessions/{sid}/reset"), None);
    ensure!(st == 200, "reset: {st}");
    let (st, _) = s.call("DELETE", &format!("/sessions/{sid}"), None);
    let (gone, _) = s.call("GET", &format!("/sessions/{sid}/graph"), None);
    ensure!(st == 204 && gone == 404, "delete session: {st}, then {gone}");
    Ok(format!("flow 1 on {dataset}: node {node} corrected by removing ({u}, {v})"))
}

/// Compare GCN and GAT explanations of shared correct nodes, read GAT
/// attention, and project both embedding spaces.
fn flow_2(s: &Server, dataset: &str) -> Result<String, String> {
    train(s, dataset, "gcn", "cs2-gcn")?;
    train(s, dataset, "gat", "cs2-gat")?;
    let (gcn, gat) = (open(s, dataset, "cs2-gcn")?, open(s, dataset, "cs2-gat")?);
    let (_, g1) = s.call("GET", &format!("/sessions/{gcn}/graph"), None);
    let (_, g2) = s.call("GET", &format!("/sessions/{gat}/graph"), None);
    let has_edge = |n: usize| g1["edges"].as_array().unwrap().iter().any(|e| e["u"] == n || e["v"] == n);
    let shared: Vec<usize> = g1["nodes"]
        .as_array()
        .unwrap()
        .iter()
        .zip(g2["nodes"].as_array().unwrap())
        .filter(|(a, b)| !a["true_class"].is_null() && a["true_class"] == a["predicted_class"] && b["true_class"] == b["predicted_class"])
        .map(|(a, _)| a["id"].as_u64().unwrap() as usize)
        .filter(|&n| has_edge(n))
        .take(3)
        .collect();
    ensure!(shared.len() == 3, "fewer than 3 shared correct nodes");
    let mut entropies = [0.0, 0.0];
    for &node in &shared {
        for (k, sid) in [&gcn, &gat].into_iter().enumerate() {
            let e = explain(s, sid, node)?;
            let mask: Vec<f64> = e["edge_mask"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
            entropies[k] += normalized_top_k_entropy(&mask, 10) / shared.len() as f64;
        }
        let (st, att) = s.call("GET", &format!("/sessions/{gat}/attention/{node}"), None);
        ensure!(st == 200 && att["attention"]["center"] == node && !att["attention"]["assigns"].as_array().unwrap().is_empty(), "attention: {st} {att}");
        let (st, err) = s.call("GET", &format!("/sessions/{gcn}/attention/{node}"), None);
        ensure!(st == 404 && err["code"] == "model-not-gat", "attention on GCN: {st} {err}");
    }
    let n = g1["nodes"].as_array().unwrap().len();
    for sid in [&gcn, &gat] {
        let (st, p) = s.call("GET", &format!("/sessions/{sid}/embeddings?method=pca"), None);
        ensure!(st == 200 && p["coords"].as_array().unwrap().len() == n, "PCA embeddings: {st}");
    }
    let (st, job) = s.call("GET", &format!("/sessions/{gat}/embeddings?method=tsne&perplexity=20&iters=250&seed=1"), None);
    ensure!(st == 202, "t-SNE request: {st} {job}");
    let done = s.wait(&job);
    ensure!(done["state"] == "done" && done["result"]["coords"].as_array().unwrap().len() == n, "t-SNE job ended {}", done["state"]);
    Ok(format!(
        "flow 2 on {dataset}: explained nodes {shared:?} under both models (mean top-10 entropy GCN {:.3}, GAT {:.3}), GAT attention read, PCA and t-SNE projections returned",
        entropies[0], entropies[1]
    ))
}

/// Invalid requests must all come back as 4xx with `{code, message}`.
fn fuzz(s: &mut Server, ds1: &str, ds2: &str) -> Result<String, String> {
    let sid = open(s, ds1, "cs1-gcn")?;
    let big = "9".repeat(40);
    let mut cases: Vec<(&str, String, Option<String>)> = vec![
        ("POST", "/train".into(), Some("not json".into())),
        ("POST", "/train".into(), Some("{}".into())),
        ("POST", "/train".into(), Some(json!({"dataset": "nope", "arch": "gcn"}).to_string())),
        ("POST", "/train".into(), Some(json!({"dataset": ds1, "arch": "mlp"}).to_string())),
        ("POST", "/train".into(), Some(json!({"dataset": ds1, "arch": "gcn", "config": {"lr": -1.0}}).to_string())),
        ("POST", "/train".into(), Some(json!({"dataset": ds1, "arch": "gcn", "name": "../escape"}).to_string())),
        ("POST", "/sessions".into(), Some(json!({"dataset": "nope", "model": "cs1-gcn"}).to_string())),
        ("POST", "/sessions".into(), Some(json!({"dataset": ds2, "model": "cs1-gcn"}).to_string())),
        ("GET", "/sessions/nope/graph".into(), None),
        ("GET", format!("/sessions/{sid}/nodes/999999"), None),
        ("GET", format!("/sessions/{sid}/nodes/abc"), None),
        ("GET", format!("/sessions/{sid}/nodes/{big}"), None),
        ("POST", format!("/sessions/{sid}/edits"), Some(json!({"op": "add_edge", "u": 0, "v": 0}).to_string())),
        ("POST", format!("/sessions/{sid}/edits"), Some(json!({"op": "remove_edge", "u": 0, "v": 999999}).to_string())),
        ("POST", format!("/sessions/{sid}/edits"), Some(json!({"op": "teleport"}).to_string())),
        ("POST", format!("/sessions/{sid}/edits"), Some("[1,2".into())),
        ("POST", format!("/sessions/{sid}/explain"), Some(json!({"node": 999999}).to_string())),
        ("POST", format!("/sessions/{sid}/explain"), Some(json!({"node": -1}).to_string())),
        ("POST", format!("/sessions/{sid}/explain"), Some(json!({"node": 0, "config": {"lr": "fast"}}).to_string())),
        ("GET", format!("/sessions/{sid}/embeddings?method=umap"), None),
        ("GET", format!("/sessions/{sid}/embeddings?method=tsne&perplexity=100000"), None),
        ("GET", format!("/sessions/{sid}/attention/0"), None),
        ("GET", "/jobs/nope".into(), None),
        ("DELETE", "/jobs/nope".into(), None),
        ("GET", "/no/such/route".into(), None),
        ("PUT", "/datasets".into(), None),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for k in 0..60 {
        let len = rng.random_range(0..48);
        let body: String = (0..len).map(|_| char::from(rng.random_range(0x20u8..0x7f))).collect();
        let path = ["/train".to_string(), "/sessions".into(), format!("/sessions/{sid}/edits"), format!("/sessions/{sid}/explain")][k % 4].clone();
        cases.push(("POST", path, Some(body)));
    }
    for (method, path, body) in &cases {
        let (st, v) = s.send(method, path, body.clone());
        ensure!((400..500).contains(&st), "{method} {path} {body:?}: status {st}");
        ensure!(v["code"].is_string() && v["message"].is_string(), "{method} {path}: unstructured error {v}");
    }
    let (st, _) = s.call("GET", "/datasets", None);
    ensure!(st == 200 && s.alive(), "service unresponsive after fuzzing");
    Ok(format!("{} invalid requests answered 4xx with {{code, message}}", cases.len()))
}

pub fn run(ctx: &Ctx) -> Verdict {
    let root = ctx.work.path().join("api");
    let (data, models) = (root.join("data"), root.join("models"));
    std::fs::create_dir_all(&data).unwrap();
    std::fs::create_dir_all(&models).unwrap();
    let mut names = Vec::new();
    let mut sources = Vec::new();
    for (name, classes, features, edges) in [(CORA, 7, 300, 1300), (CITESEER, 6, 400, 900)] {
        if ctx.real(name).is_ok() {
            std::fs::copy(ctx.real_path(name), data.join(format!("{name}.gnnds"))).unwrap();
            names.push(name.to_string());
            sources.push(format!("{name} (benchmark)"));
        } else {
            let synthetic = format!("{name}-like");
            let ds = citation_like(&CitationLikeConfig {
                name: synthetic.clone(),
                num_nodes: 600,
                num_classes: classes,
                num_features: features,
                num_edges: edges,
                split: SplitSpec { train_per_class: 20, val_size: 100, test_size: 200, ..Default::default() },
                seed: 5,
                ..Default::default()
            })
            .unwrap();
            export_dataset(&ds, data.join(format!("{synthetic}.gnnds"))).unwrap();
            sources.push(format!("{synthetic} (synthetic fallback)"));
            names.push(synthetic);
        }
    }
    let mut server = match Server::start(&data, &models) {
        Ok(s) => s,
        Err(e) => return Verdict::Fail(format!("gnnx serve did not start: {e}")),
    };
    let (st, index) = server.call("GET", "/", None);
    let mut parts = vec![format!("no UI configured, GET / → {st} route catalog ({} routes)", index["routes"].as_array().map_or(0, |r| r.len()))];
    let steps = [flow_1(&server, &root, &names[0]), flow_2(&server, &names[1])];
    let mut ok = st == 200;
    for r in steps {
        match r {
            Ok(d) => parts.push(d),
            Err(e) => {
                ok = false;
                parts.push(format!("FAILED: {e}"));
            }
        }
    }
    match fuzz(&mut server, &names[0], &names[1]) {
        Ok(d) => parts.push(d),
        Err(e) => {
            ok = false;
            parts.push(format!("FAILED: {e}"));
        }
    }
    Verdict::check(ok, format!("datasets {}; {}", sources.join(", "), parts.join("; ")))
}
