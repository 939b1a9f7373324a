//! Arbitrary request bodies never crash the service: every response is
//! either a success or a structured error with a non-5xx status.

mod common;

use axum::body::Body;
use axum::http::Request;
use common::{call, fixture, open_session, raw};
use gnnx_service::ErrorBody;
use proptest::prelude::*;
use serde_json::{json, Value};

fn json_value() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        any::<i64>().prop_map(|v| json!(v)),
        (-1e6f64..1e6).prop_map(|v| json!(v)),
        "[a-z_]{0,12}".prop_map(Value::String),
        prop_oneof![Just("remove_edge"), Just("add_edge"), Just("add_node"), Just("remove_node"), Just("copy_of")]
            .prop_map(|s| json!(s)),
    ];
    leaf.prop_recursive(3, 24, 5, |inner| {
        prop_oneof![
            proptest::collection::vec(inner.clone(), 0..4).prop_map(Value::Array),
            proptest::collection::btree_map(
                prop_oneof![
                    Just("op".to_string()),
                    Just("u".to_string()),
                    Just("v".to_string()),
                    Just("id".to_string()),
                    Just("node".to_string()),
                    Just("config".to_string()),
                    Just("dataset".to_string()),
                    Just("model".to_string()),
                    Just("arch".to_string()),
                    Just("feature_source".to_string()),
                    "[a-z]{1,6}",
                ],
                inner,
                0..5
            )
            .prop_map(|m| Value::Object(m.into_iter().collect())),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn invalid_bodies_yield_structured_errors(
        body in prop_oneof![json_value().prop_map(|v| v.to_string()), ".{0,40}"],
        route in 0usize..5,
    ) {
        thread_local! {
            static CTX: (tempfile::TempDir, tokio::runtime::Runtime, axum::Router, String) = {
                let (d, cfg) = fixture();
                let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().unwrap();
                let app = common::app(&cfg);
                let sid = rt.block_on(open_session(&app, "toy-gcn"));
                (d, rt, app, sid)
            };
        }
        CTX.with(|(_, rt, app, sid)| {
            let uri = match route {
                0 => format!("/sessions/{sid}/edits"),
                1 => format!("/sessions/{sid}/explain"),
                2 => "/sessions".to_string(),
                3 => "/train".to_string(),
                _ => format!("/sessions/{sid}/reset"),
            };
            let req = Request::post(&uri).header("content-type", "application/json").body(Body::from(body.clone())).unwrap();
            let (status, value) = rt.block_on(raw(app, req));
            prop_assert!(!status.is_server_error(), "{uri} {body} -> {status} {value}");
            if !status.is_success() {
                let e: ErrorBody = serde_json::from_value(value.clone()).map_err(|e| TestCaseError::fail(format!("{e}: {value}")))?;
                prop_assert!(!e.code.is_empty() && !e.message.is_empty());
            }
            // the service still answers afterwards
            let (s, _) = rt.block_on(call(app, "GET", &format!("/sessions/{sid}/graph"), None));
            prop_assert!(s.is_success());
            Ok(())
        })?;
    }
}
