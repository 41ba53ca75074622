//! HTTP routes.
//!
//! | method | path                                        | body / reply                      |
//! |--------|---------------------------------------------|-----------------------------------|
//! | PUT    | `/topics/{t}`                               | TopicConfig (JSON or TOML)        |
//! | POST   | `/topics/{t}/logs`                          | newline-separated raw logs        |
//! | POST   | `/topics/{t}/train`                         | `{version, ...}`                  |
//! | GET    | `/topics/{t}/templates?threshold=`          | template rows                     |
//! | GET    | `/topics/{t}/templates/{node_id}/ancestors` | saturation chain, parent first    |
//! | GET    | `/topics/{t}/model`                         | model file                        |
//! | GET    | `/healthz`                                  | liveness                          |

use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::Deserialize;
use strata_core::{NodeId, TopicConfig};

use crate::config::ServiceConfig;
use crate::error::{Result, ServiceError};
use crate::service::{unix_now, Service};

const MAX_BODY_BYTES: usize = 256 * 1024 * 1024;

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/topics/:topic", put(put_topic))
        .route("/topics/:topic/logs", post(ingest))
        .route("/topics/:topic/train", post(train))
        .route("/topics/:topic/templates", get(templates))
        .route("/topics/:topic/templates/:node/ancestors", get(ancestors))
        .route("/topics/:topic/model", get(model))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(service)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T> + Send + 'static) -> Result<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Conflict(format!("worker failed: {e}")))?
}

fn utf8(body: &Bytes) -> Result<&str> {
    std::str::from_utf8(body).map_err(|e| ServiceError::InvalidInput(format!("body is not UTF-8: {e}")))
}

async fn put_topic(
    State(service): State<Arc<Service>>,
    Path(topic): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<impl IntoResponse> {
    let text = utf8(&body)?;
    let is_toml = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.contains("toml"));
    let config: TopicConfig = if is_toml {
        toml::from_str(text).map_err(|e| ServiceError::InvalidInput(e.to_string()))?
    } else if text.trim().is_empty() {
        TopicConfig::default()
    } else {
        serde_json::from_str(text).map_err(|e| ServiceError::InvalidInput(e.to_string()))?
    };
    let fingerprint = config.fingerprint();
    let created = service.put_topic(&topic, config)?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(serde_json::json!({ "topic": topic, "config_fingerprint": fingerprint }))))
}

async fn ingest(State(service): State<Arc<Service>>, Path(topic): Path<String>, body: Bytes) -> Result<impl IntoResponse> {
    let text = utf8(&body)?.to_owned();
    let svc = service.clone();
    let name = topic.clone();
    let results = blocking(move || {
        let lines: Vec<&str> = text.lines().collect();
        svc.ingest(&name, &lines)
    })
    .await?;
    spawn_training_if_due(&service, &topic);
    Ok(Json(results))
}

fn spawn_training_if_due(service: &Arc<Service>, topic: &str) {
    let Ok(t) = service.topic(topic) else { return };
    let now = unix_now();
    if t.is_training() || !t.read(|s| s.should_train(now)) {
        return;
    }
    let service = service.clone();
    let topic = topic.to_owned();
    tokio::task::spawn_blocking(move || {
        if let Err(e) = service.train(&topic, unix_now()) {
            tracing::warn!(topic, error = %e, "background training failed");
        }
    });
}

async fn train(State(service): State<Arc<Service>>, Path(topic): Path<String>) -> Result<impl IntoResponse> {
    let outcome = blocking(move || service.train(&topic, unix_now())).await?;
    Ok(Json(outcome))
}

#[derive(Debug, Deserialize)]
struct ThresholdQuery {
    threshold: Option<f64>,
}

async fn templates(
    State(service): State<Arc<Service>>,
    Path(topic): Path<String>,
    Query(q): Query<ThresholdQuery>,
) -> Result<impl IntoResponse> {
    let threshold = q.threshold.unwrap_or(1.0);
    tracing::debug!(topic, threshold, "template query");
    Ok(Json(service.query(&topic, threshold)?))
}

async fn ancestors(
    State(service): State<Arc<Service>>,
    Path((topic, node)): Path<(String, u64)>,
) -> Result<impl IntoResponse> {
    Ok(Json(service.ancestors(&topic, NodeId(node))?))
}

async fn model(State(service): State<Arc<Service>>, Path(topic): Path<String>) -> Result<impl IntoResponse> {
    let bytes = service.model_bytes(&topic)?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], bytes))
}

/// Run the HTTP server until Ctrl-C, checking time-based training triggers
/// every `trigger_check_secs`.
pub async fn serve(config: ServiceConfig) -> Result<()> {
    let service = Arc::new(Service::from_config(&config)?);
    let listener = tokio::net::TcpListener::bind(config.listen).await?;
    tracing::info!(addr = %listener.local_addr()?, topics = ?service.topic_names(), "listening");

    let ticker = service.clone();
    let period = Duration::from_secs(config.trigger_check_secs);
    tokio::spawn(async move {
        let mut interval = tokio::time::interval(period);
        loop {
            interval.tick().await;
            for topic in ticker.due_for_training(unix_now()) {
                spawn_training_if_due(&ticker, &topic);
            }
        }
    });

    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
