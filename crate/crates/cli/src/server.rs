//! HTTP JSON service.
//!
//! `POST /normalize` accepts `{"text": str}` and returns one result, or
//! `{"documents": [{"doc_id": str, "text": str}, ...]}` and returns
//! `{"results": [...]}` in input order. `GET /healthz` reports artifact
//! metadata and request counters.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use geonorm::{Document, Engine};
use serde::Deserialize;
use serde_json::{json, Value};

#[derive(Default)]
pub struct Counters {
    pub requests: AtomicU64,
    pub documents: AtomicU64,
    pub rejected: AtomicU64,
}

pub struct AppState {
    pub engine: Engine,
    pub workers: usize,
    pub counters: Counters,
}

impl AppState {
    pub fn new(engine: Engine, workers: usize) -> Arc<Self> {
        Arc::new(AppState {
            engine,
            workers: workers.max(1),
            counters: Counters::default(),
        })
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NormalizeRequest {
    Single { text: String },
    Batch { documents: Vec<Document> },
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

pub fn router(state: Arc<AppState>, max_body_bytes: usize) -> Router {
    Router::new()
        .route("/normalize", post(normalize))
        .route("/healthz", get(healthz))
        .layer(DefaultBodyLimit::max(max_body_bytes))
        .with_state(state)
}

async fn normalize(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    state.counters.requests.fetch_add(1, Ordering::Relaxed);
    let request: NormalizeRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => {
            state.counters.rejected.fetch_add(1, Ordering::Relaxed);
            let message = if serde_json::from_slice::<Value>(&body).is_ok() {
                "expected {\"text\": string} or {\"documents\": [{\"doc_id\": string, \"text\": string}]}".to_owned()
            } else {
                format!("malformed JSON: {e}")
            };
            return error(StatusCode::BAD_REQUEST, message);
        }
    };
    let worker_state = Arc::clone(&state);
    let result = tokio::task::spawn_blocking(move || match request {
        NormalizeRequest::Single { text } => {
            worker_state.counters.documents.fetch_add(1, Ordering::Relaxed);
            json!(worker_state.engine.normalize(&text))
        }
        NormalizeRequest::Batch { documents } => {
            worker_state
                .counters
                .documents
                .fetch_add(documents.len() as u64, Ordering::Relaxed);
            let results = worker_state.engine.normalize_batch(&documents, worker_state.workers);
            json!({ "results": results })
        }
    })
    .await;
    match result {
        Ok(v) => Json(v).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<Value> {
    let engine = &state.engine;
    let c = &state.counters;
    Json(json!({
        "status": "ok",
        "version": env!("CARGO_PKG_VERSION"),
        "gazetteer_records": engine.gazetteer().len(),
        "embeddings": engine.embeddings().map(|t| json!({ "tokens": t.len(), "dim": t.dim() })),
        "roi_entries": engine.roi_store().map(|s| s.len()),
        "options": engine.options(),
        "workers": state.workers,
        "requests": c.requests.load(Ordering::Relaxed),
        "documents": c.documents.load(Ordering::Relaxed),
        "rejected": c.rejected.load(Ordering::Relaxed),
    }))
}

/// Binds `addr` and serves until Ctrl-C.
pub async fn serve(state: Arc<AppState>, addr: &str, max_body_bytes: usize) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state, max_body_bytes))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
