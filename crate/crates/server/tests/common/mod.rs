#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use funnel_server::{build_state, router, ServiceConfig};

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data/fixture")
}

pub fn fixture_config() -> ServiceConfig {
    let dir = fixture_dir();
    ServiceConfig {
        corpus: Some(dir.join("corpus.jsonl")),
        ontology: Some(dir.join("ontology.jsonl")),
        lexicon: Some(dir.join("verbs.tsv")),
        ..Default::default()
    }
}

pub fn app() -> Router {
    app_with(fixture_config())
}

pub fn app_with(config: ServiceConfig) -> Router {
    router(Arc::new(build_state(&config).unwrap()))
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let body = match body {
        Some(v) => Body::from(v.to_string()),
        None => Body::empty(),
    };
    let request = Request::builder().method(method).uri(uri).header("content-type", "application/json").body(body).unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

pub async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, "POST", uri, Some(body)).await
}

pub async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, "GET", uri, None).await
}

pub fn stages(trace: &Value) -> Vec<String> {
    trace["events"].as_array().unwrap().iter().map(|e| e["stage"].as_str().unwrap().to_string()).collect()
}

pub fn ordinals_contiguous(trace: &Value) -> bool {
    trace["events"].as_array().unwrap().iter().enumerate().all(|(i, e)| e["ordinal"].as_u64() == Some(i as u64 + 1))
}
