#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use reqlens_core::corpus::{save_corpus, Format, Level, Requirement, RequirementSet};
use reqlens_core::Kind;
use reqlens_service::{router, AppState, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub config: ServiceConfig,
}

/// Five requirements mixing functional and quality statements, with hints
/// and rule findings present so blindness has something to leak.
pub fn pilot_corpus() -> RequirementSet {
    RequirementSet::new(
        "pilot",
        vec![
            Requirement::new("R1", Level::System, "The reader shall report each tag read to the server.").with_hint(Kind::Functional),
            Requirement::new("R2", Level::System, "The server shall encrypt stored badge identifiers.").with_hint(Kind::NonFunctional),
            Requirement::new("R3", Level::System, "The console shall respond quickly to operator input.").with_hint(Kind::NonFunctional),
            Requirement::new("R4", Level::Stakeholder, "Nurses shall be able to locate an infusion pump.").with_hint(Kind::Functional),
            Requirement::new("R5", Level::System, "The system shall be available 99.9% of each calendar month.").with_hint(Kind::NonFunctional),
        ],
    )
}

pub fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("pilot.json");
    save_corpus(&pilot_corpus(), &corpus, Format::Json).unwrap();
    let config = ServiceConfig { data_dir: dir.path().join("data"), corpora: vec![corpus], ..ServiceConfig::default() };
    Fixture { dir, config }
}

impl Fixture {
    pub fn app(&self) -> Router {
        router(AppState::open(&self.config).unwrap())
    }

    pub fn data(&self) -> &Path {
        &self.config.data_dir
    }

    pub fn session_dir(&self, id: &str) -> PathBuf {
        self.data().join("sessions").join(id)
    }
}

pub struct Reply {
    pub status: StatusCode,
    pub raw: String,
    pub json: Value,
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let raw = String::from_utf8(bytes.to_vec()).unwrap();
    let json = serde_json::from_str(&raw).unwrap_or(Value::Null);
    Reply { status, raw, json }
}

pub async fn get(app: &Router, uri: &str) -> Reply {
    call(app, Method::GET, uri, None).await
}

pub async fn post(app: &Router, uri: &str, body: Value) -> Reply {
    call(app, Method::POST, uri, Some(body)).await
}

pub async fn create(app: &Router, alias: &str, axes: &[&str]) -> String {
    let r = post(app, "/sessions", json!({"corpus_name": "pilot", "annotator_alias": alias, "axis_set": axes})).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.raw);
    r.json["session_id"].as_str().unwrap().to_string()
}

pub async fn annotate(app: &Router, id: &str, item: &str, axis: &str, label: &str) -> Reply {
    post(app, &format!("/sessions/{id}/annotations"), json!({"requirement_id": item, "axis": axis, "label": label})).await
}

/// Answers every remaining cell with `pick(item, axis)`.
pub async fn finish(app: &Router, id: &str, pick: impl Fn(&str, &str) -> String) {
    loop {
        let next = get(app, &format!("/sessions/{id}/next")).await;
        assert_eq!(next.status, StatusCode::OK);
        if next.json["status"] == "Done" {
            break;
        }
        let item = next.json["requirement"]["id"].as_str().unwrap().to_string();
        let axis = next.json["axis"].as_str().unwrap().to_string();
        let r = annotate(app, id, &item, &axis, &pick(&item, &axis)).await;
        assert_eq!(r.status, StatusCode::OK, "{}", r.raw);
    }
}

pub fn state_arc(f: &Fixture) -> Arc<AppState> {
    AppState::open(&f.config).unwrap()
}
