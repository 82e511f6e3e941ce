#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use serde_json::Value;
use tower::ServiceExt;

use atlas_core::gateway::Gateway;
use atlas_core::pipeline::{run_pipeline, InputFormat, PipelineConfig, RawRecord};
use atlas_core::synthetic;
use atlas_service::{load_state, router, ServiceState};

pub fn record(id: &str, title: &str, description: &str, date: &str) -> RawRecord {
    RawRecord {
        id: id.into(),
        title: title.into(),
        description: description.into(),
        group: "g".into(),
        date: date.into(),
    }
}

pub fn build_artifacts(dir: &Path, records: &[RawRecord]) {
    let input = dir.join("input.json");
    std::fs::write(&input, synthetic::to_json(records)).unwrap();
    run_pipeline(&input, InputFormat::Json, dir, &PipelineConfig::default(), &Gateway::mock()).unwrap();
}

pub fn synthetic_state(dir: &Path, n: usize) -> ServiceState {
    build_artifacts(dir, &synthetic::generate(n, 42));
    load_state(dir, Gateway::mock()).unwrap()
}

pub async fn get(state: &Arc<ServiceState>, uri: &str) -> (StatusCode, Value) {
    let req = Request::get(uri).body(Body::empty()).unwrap();
    send(state, req).await
}

pub async fn post_json(state: &Arc<ServiceState>, uri: &str, body: &Value) -> (StatusCode, Value) {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    send(state, req).await
}

async fn send(state: &Arc<ServiceState>, req: Request<Body>) -> (StatusCode, Value) {
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}
