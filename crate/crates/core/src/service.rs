//! HTTP classification worker.
//!
//! `POST /classify` takes `{"recording": <stroke array or its JSON string>,
//! "k": 10}` and answers with at most 10 single-entry maps from symbol id
//! (as a string) to probability, descending. `GET /health` reports the loaded
//! model, `POST /reload` swaps in the model file again and every other path is
//! served from the static directory.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::{json, Map, Value};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};
use tower_http::services::ServeDir;

use crate::recognizer::{Recognizer, RecognizerInfo};
use crate::recording::{parse_recording, recording_from_value, ClassificationResult};

/// Most hypotheses a response may carry.
pub const MAX_RESULTS: usize = 10;
pub const DEFAULT_BODY_LIMIT: usize = 1 << 20;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Bundle file or directory; `None` starts degraded.
    pub model: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
    /// Allowed origin, `*` for any; `None` disables CORS headers.
    pub cors_origin: Option<String>,
    pub body_limit: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            model: None,
            static_dir: None,
            cors_origin: Some("*".into()),
            body_limit: DEFAULT_BODY_LIMIT,
        }
    }
}

/// Shared server state. Handlers clone the current snapshot; reload replaces
/// it under the write lock.
pub struct AppState {
    model: RwLock<Option<Arc<Recognizer>>>,
    model_path: Option<PathBuf>,
    reload_lock: tokio::sync::Mutex<()>,
    started: Instant,
}

impl AppState {
    /// Loads the configured model. A load failure is logged and leaves the
    /// service degraded.
    pub fn new(model_path: Option<PathBuf>) -> Self {
        let model = model_path.as_ref().and_then(|p| match Recognizer::load(p) {
            Ok(r) => Some(Arc::new(r)),
            Err(e) => {
                tracing::error!("cannot load model: {e}");
                None
            }
        });
        AppState {
            model: RwLock::new(model),
            model_path,
            reload_lock: tokio::sync::Mutex::new(()),
            started: Instant::now(),
        }
    }

    pub fn with_recognizer(recognizer: Recognizer) -> Self {
        AppState {
            model: RwLock::new(Some(Arc::new(recognizer))),
            model_path: None,
            reload_lock: tokio::sync::Mutex::new(()),
            started: Instant::now(),
        }
    }

    pub fn snapshot(&self) -> Option<Arc<Recognizer>> {
        self.model.read().expect("model lock").clone()
    }

    fn swap(&self, r: Recognizer) {
        *self.model.write().expect("model lock") = Some(Arc::new(r));
    }
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

/// The response shape: `[{"31": 0.88}, {"1": 0.11}, ...]`. Hypotheses with
/// probability 0 are left out.
pub fn response_body(result: &ClassificationResult) -> Value {
    Value::Array(
        result
            .iter()
            .filter(|h| h.probability > 0.0)
            .take(MAX_RESULTS)
            .map(|h| {
                let mut m = Map::new();
                m.insert(h.symbol.to_string(), json!(h.probability));
                Value::Object(m)
            })
            .collect(),
    )
}

fn parse_request(body: &[u8]) -> Result<(crate::recording::Recording, usize), String> {
    let v: Value = serde_json::from_slice(body).map_err(|e| format!("body is not JSON: {e}"))?;
    let obj = v.as_object().ok_or("body must be an object with a recording field")?;
    let rec = match obj.get("recording") {
        Some(Value::String(s)) => parse_recording(s),
        Some(r) => recording_from_value(r),
        None => return Err("missing field recording".into()),
    }
    .map_err(|e| format!("invalid recording: {e}"))?;
    let k = match obj.get("k") {
        None | Some(Value::Null) => MAX_RESULTS,
        Some(k) => match k.as_u64() {
            Some(k) if k >= 1 => (k as usize).min(MAX_RESULTS),
            _ => return Err(format!("k must be a positive integer, got {k}")),
        },
    };
    Ok((rec, k))
}

async fn classify(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let (rec, k) = match parse_request(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, e),
    };
    let Some(model) = state.snapshot() else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "no model loaded");
    };
    match tokio::task::spawn_blocking(move || model.classify(&rec, k)).await {
        Ok(Ok(result)) => Json(response_body(&result)).into_response(),
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

#[derive(Debug, Serialize)]
pub struct Health {
    /// `ok` or `degraded`.
    pub status: &'static str,
    pub model: Option<RecognizerInfo>,
    pub uptime_seconds: f64,
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Health> {
    let model = state.snapshot().map(|m| m.info().clone());
    Json(Health {
        status: if model.is_some() { "ok" } else { "degraded" },
        model,
        uptime_seconds: state.started.elapsed().as_secs_f64(),
    })
}

async fn reload(State(state): State<Arc<AppState>>) -> Response {
    let _guard = state.reload_lock.lock().await;
    let Some(path) = state.model_path.clone() else {
        return error(StatusCode::CONFLICT, "service was started without a model path");
    };
    match tokio::task::spawn_blocking(move || Recognizer::load(&path)).await {
        Ok(Ok(r)) => {
            let info = r.info().clone();
            state.swap(r);
            tracing::info!(hash = %info.model_hash, "model reloaded");
            Json(info).into_response()
        }
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, format!("reload failed, keeping the old model: {e}")),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

pub fn router(state: Arc<AppState>, config: &ServiceConfig) -> Router {
    let mut app = Router::new()
        .route("/classify", post(classify))
        .route("/health", get(health))
        .route("/reload", post(reload))
        .layer(DefaultBodyLimit::max(config.body_limit))
        .with_state(state);
    if let Some(dir) = &config.static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    match config.cors_origin.as_deref() {
        None => app,
        Some("*") => app.layer(CorsLayer::new().allow_origin(Any).allow_methods(Any).allow_headers(Any)),
        Some(origin) => match HeaderValue::from_str(origin) {
            Ok(v) => app.layer(
                CorsLayer::new()
                    .allow_origin(AllowOrigin::exact(v))
                    .allow_methods(Any)
                    .allow_headers(Any),
            ),
            Err(_) => {
                tracing::warn!(origin, "invalid CORS origin; CORS disabled");
                app
            }
        },
    }
}

/// Serves until ctrl-c.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let state = Arc::new(AppState::new(config.model.clone()));
    let app = router(state, &config);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
