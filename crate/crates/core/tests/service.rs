use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use symrec::features::{baseline_features, Standardization};
use symrec::mlp::{init_model, Activation, Layer, MlpModel};
use symrec::preprocess::{Interpolation, PreprocessingQueue, PreprocessingStep, ShiftVariant};
use symrec::recognizer::{Backend, BackendRef, BundleFile, Recognizer, BUNDLE_VERSION};
use symrec::recording::SymbolTable;
use symrec::service::{router, AppState, ServiceConfig};

const RECORDING: &str = include_str!("../data/292927.json");

fn bundle(symbols: SymbolTable) -> BundleFile {
    BundleFile {
        format_version: BUNDLE_VERSION,
        preprocessing: PreprocessingQueue::new(vec![
            PreprocessingStep::scale_and_shift(ShiftVariant::I1),
            PreprocessingStep::SpaceEvenlyPerStroke {
                number: 20,
                kind: Interpolation::Linear,
            },
        ])
        .unwrap(),
        features: baseline_features(),
        standardization: Standardization::identity(160),
        symbols,
        backend: BackendRef::Mlp {
            model: "model-1.json".into(),
        },
    }
}

fn save_random(dir: &Path, classes: usize, seed: u64) {
    let symbols = SymbolTable::anonymous(classes);
    let model = init_model(&[160, 12, classes], Activation::Sigmoid, symbols.clone(), seed).unwrap();
    Recognizer::new(bundle(symbols), Backend::Mlp(model)).save(dir).unwrap();
}

/// Zero weights: every symbol gets 1/n.
fn uniform(classes: usize) -> Recognizer {
    let symbols = SymbolTable::anonymous(classes);
    let model = MlpModel::new(
        vec![Layer {
            weights: ndarray::Array2::zeros((161, classes)),
            activation: Activation::Softmax,
        }],
        symbols.clone(),
    )
    .unwrap();
    Recognizer::new(bundle(symbols), Backend::Mlp(model))
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    (status, headers, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn classify_req(body: impl Into<Body>) -> Request<Body> {
    Request::post("/classify")
        .header(header::CONTENT_TYPE, "application/json")
        .body(body.into())
        .unwrap()
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

#[tokio::test]
async fn uniform_model_returns_ten_equal_entries_by_id() {
    let app = router(Arc::new(AppState::with_recognizer(uniform(20))), &ServiceConfig::default());
    let (status, _, body) = call(&app, classify_req(format!(r#"{{"recording": {RECORDING}}}"#))).await;
    assert_eq!(status, StatusCode::OK);
    let list = json(&body);
    let list = list.as_array().unwrap();
    assert_eq!(list.len(), 10);
    for (i, entry) in list.iter().enumerate() {
        let obj = entry.as_object().unwrap();
        assert_eq!(obj.len(), 1);
        assert_eq!(obj[&i.to_string()].as_f64().unwrap(), 1.0 / 20.0);
    }
}

#[tokio::test]
async fn identical_requests_identical_responses_and_k() {
    let dir = tempfile::tempdir().unwrap();
    save_random(dir.path(), 15, 4);
    let app = router(
        Arc::new(AppState::new(Some(dir.path().to_path_buf()))),
        &ServiceConfig::default(),
    );
    let body = format!(r#"{{"recording": {RECORDING}, "k": 3}}"#);
    let (_, _, a) = call(&app, classify_req(body.clone())).await;
    let (_, _, b) = call(&app, classify_req(body)).await;
    assert_eq!(a, b);
    assert_eq!(json(&a).as_array().unwrap().len(), 3);
    let quoted = serde_json::to_string(RECORDING).unwrap();
    let (status, _, c) = call(&app, classify_req(format!(r#"{{"recording": {quoted}, "k": 3}}"#))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(a, c);
}

#[tokio::test]
async fn malformed_and_oversized_bodies() {
    let config = ServiceConfig {
        body_limit: 4096,
        ..ServiceConfig::default()
    };
    let app = router(Arc::new(AppState::with_recognizer(uniform(3))), &config);
    for body in ["not json", r#"{"k": 2}"#, r#"{"recording": [[]]}"#, r#"{"recording": [[{"x":1,"y":1,"time":0}]], "k": -1}"#] {
        let (status, _, bytes) = call(&app, classify_req(body)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        assert!(json(&bytes)["error"].is_string());
    }
    let (status, _, _) = call(&app, classify_req(format!(r#"{{"recording": {RECORDING}}}"#))).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
}

#[tokio::test]
async fn health_degraded_without_model() {
    let app = router(Arc::new(AppState::new(None)), &ServiceConfig::default());
    let (status, _, body) = call(&app, Request::get("/health").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    let v = json(&body);
    assert_eq!(v["status"], "degraded");
    assert!(v["model"].is_null());
    let (status, _, _) = call(&app, classify_req(format!(r#"{{"recording": {RECORDING}}}"#))).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
}

#[tokio::test]
async fn health_reports_model_and_reload_swaps_hash() {
    let dir = tempfile::tempdir().unwrap();
    save_random(dir.path(), 7, 1);
    let app = router(
        Arc::new(AppState::new(Some(dir.path().to_path_buf()))),
        &ServiceConfig::default(),
    );
    let health = || async { json(&call(&app, Request::get("/health").body(Body::empty()).unwrap()).await.2) };
    let before = health().await;
    assert_eq!(before["status"], "ok");
    assert_eq!(before["model"]["symbol_count"], 7);
    assert_eq!(before["model"]["topology"], "160:12:7");
    assert!(before["uptime_seconds"].as_f64().unwrap() >= 0.0);

    save_random(dir.path(), 9, 2);
    let (status, _, body) = call(&app, Request::post("/reload").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(json(&body)["symbol_count"], 9);
    let after = health().await;
    assert_eq!(after["model"]["symbol_count"], 9);
    assert_ne!(after["model"]["model_hash"], before["model"]["model_hash"]);

    std::fs::write(dir.path().join("recognizer.json"), "{").unwrap();
    let (status, _, _) = call(&app, Request::post("/reload").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::INTERNAL_SERVER_ERROR);
    assert_eq!(health().await["model"]["model_hash"], after["model"]["model_hash"]);
}

#[tokio::test]
async fn static_route_and_cors() {
    let web = tempfile::tempdir().unwrap();
    std::fs::write(web.path().join("index.html"), "<canvas></canvas>").unwrap();
    let config = ServiceConfig {
        static_dir: Some(web.path().to_path_buf()),
        cors_origin: Some("http://localhost:8080".into()),
        ..ServiceConfig::default()
    };
    let app = router(Arc::new(AppState::with_recognizer(uniform(3))), &config);
    let (status, _, body) = call(&app, Request::get("/index.html").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, b"<canvas></canvas>");
    let (status, _, _) = call(&app, Request::get("/").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);

    let preflight = Request::builder()
        .method("OPTIONS")
        .uri("/classify")
        .header(header::ORIGIN, "http://localhost:8080")
        .header(header::ACCESS_CONTROL_REQUEST_METHOD, "POST")
        .body(Body::empty())
        .unwrap();
    let (_, headers, _) = call(&app, preflight).await;
    assert_eq!(headers[header::ACCESS_CONTROL_ALLOW_ORIGIN], "http://localhost:8080");
}
