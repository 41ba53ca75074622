use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use strata_core::model::deserialize;
use strata_eval::synth::android_locks;
use strata_service::{router, Service};

async fn call(app: &Router, method: &str, uri: &str, content_type: Option<&str>, body: impl Into<Body>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(ct) = content_type {
        req = req.header(header::CONTENT_TYPE, ct);
    }
    let resp = app.clone().oneshot(req.body(body.into()).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn json(app: &Router, method: &str, uri: &str, body: impl Into<Body>) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, uri, None, body).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn app() -> Router {
    router(Arc::new(Service::new()))
}

#[tokio::test]
async fn healthz() {
    let (status, body) = call(&app(), "GET", "/healthz", None, Body::empty()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, b"ok");
}

#[tokio::test]
async fn topic_lifecycle_and_errors() {
    let app = app();
    let (s, _) = json(&app, "POST", "/topics/web/logs", "a b\n").await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let (s, body) = json(&app, "PUT", "/topics/web", r#"{"prefix_k": 1}"#).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(body["topic"], "web");
    let (s, _) = call(&app, "PUT", "/topics/web", Some("application/toml"), "prefix_k = 1\n").await;
    assert_eq!(s, StatusCode::OK);
    let (s, body) = json(&app, "PUT", "/topics/web", r#"{"sample_cap": 0}"#).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(body["error"].as_str().unwrap().contains("sample_cap"));
    let (s, _) = json(&app, "PUT", "/topics/web", r#"{"nope": 1}"#).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let (s, _) = json(&app, "POST", "/topics/web/train", Body::empty()).await;
    assert_eq!(s, StatusCode::CONFLICT);

    let (s, body) = json(&app, "POST", "/topics/web/logs", "").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body, Value::Array(vec![]));

    let (s, _) = json(&app, "GET", "/topics/web/templates?threshold=1.5", Body::empty()).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = json(&app, "GET", "/topics/web/templates/999/ancestors", Body::empty()).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn table4_topic_end_to_end() {
    let app = app();
    let corpus = android_locks(100, 1);
    let total = corpus.len() as u64;
    let (s, _) = json(&app, "PUT", "/topics/android", Body::empty()).await;
    assert_eq!(s, StatusCode::CREATED);

    let body = corpus.lines.join("\n");
    let (s, first) = json(&app, "POST", "/topics/android/logs", body.clone()).await;
    assert_eq!(s, StatusCode::OK);
    let first = first.as_array().unwrap();
    assert_eq!(first.len(), corpus.len());
    assert!(first.iter().all(|r| r["matched"] == false), "fresh topic has nothing to match");

    let (s, trained) = json(&app, "POST", "/topics/android/train", Body::empty()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(trained["version"], 1);

    let rows = |v: &Value| v.as_array().unwrap().clone();
    let (_, coarse) = json(&app, "GET", "/topics/android/templates?threshold=0.05", Body::empty()).await;
    let (_, fine) = json(&app, "GET", "/topics/android/templates?threshold=0.95", Body::empty()).await;
    assert_eq!(rows(&coarse).len(), 1);
    assert_eq!(rows(&fine).len(), 8);
    for v in [&coarse, &fine] {
        assert_eq!(rows(v).iter().map(|r| r["log_count"].as_u64().unwrap()).sum::<u64>(), total);
    }
    let mut counts = Vec::new();
    for t in [0.0, 0.2, 0.4, 0.6, 0.65, 0.7, 0.74, 0.8, 0.9, 1.0] {
        let (_, v) = json(&app, "GET", &format!("/topics/android/templates?threshold={t}"), Body::empty()).await;
        counts.push(rows(&v).len());
    }
    assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{counts:?}");
    assert_eq!(counts.first(), Some(&1));
    assert_eq!(counts.last(), Some(&8));

    // A leaf's chain: its uid-level parent, the verb level, then the root.
    let leaf = rows(&fine)[0]["node_id"].as_u64().unwrap();
    let (s, chain) = json(&app, "GET", &format!("/topics/android/templates/{leaf}/ancestors"), Body::empty()).await;
    assert_eq!(s, StatusCode::OK);
    let sats: Vec<f64> = rows(&chain).iter().map(|c| c["saturation"].as_f64().unwrap()).collect();
    assert_eq!(sats.len(), 3);
    assert!(sats.windows(2).all(|w| w[0] > w[1]));
    let root = rows(&coarse)[0]["node_id"].as_u64().unwrap();
    let (_, chain) = json(&app, "GET", &format!("/topics/android/templates/{root}/ancestors"), Body::empty()).await;
    assert_eq!(chain, Value::Array(vec![]));

    let (s, again) = json(&app, "POST", "/topics/android/logs", body).await;
    assert_eq!(s, StatusCode::OK);
    assert!(again.as_array().unwrap().iter().all(|r| r["matched"] == true));
    let (_, fine) = json(&app, "GET", "/topics/android/templates?threshold=0.95", Body::empty()).await;
    assert_eq!(rows(&fine).iter().map(|r| r["log_count"].as_u64().unwrap()).sum::<u64>(), 2 * total);

    let (s, bytes) = call(&app, "GET", "/topics/android/model", None, Body::empty()).await;
    assert_eq!(s, StatusCode::OK);
    let model = deserialize(&bytes).unwrap();
    model.validate().unwrap();
    assert_eq!(model.version, 1);
    assert_eq!(model.total_count(), total);
}

#[tokio::test]
async fn volume_trigger_trains_in_the_background() {
    let app = app();
    json(&app, "PUT", "/topics/t", r#"{"initial_training_volume": 20}"#).await;
    let lines: Vec<String> = (0..20).map(|i| format!("worker {i} started")).collect();
    json(&app, "POST", "/topics/t/logs", lines.join("\n")).await;
    let mut version = 0;
    for _ in 0..200 {
        let (_, bytes) = call(&app, "GET", "/topics/t/model", None, Body::empty()).await;
        version = deserialize(&bytes).unwrap().version;
        if version > 0 {
            break;
        }
        tokio::time::sleep(std::time::Duration::from_millis(10)).await;
    }
    assert_eq!(version, 1);
}
