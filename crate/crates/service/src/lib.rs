//! HTTP service for blind annotation sessions.
//!
//! Session tokens are capabilities: whoever holds one may read and write
//! that session. While a blind session is open, session-scoped responses
//! are built only from the `Blind*` types below, which carry requirement id
//! and text and nothing else about the corpus.

pub mod store;

use std::collections::HashMap;
use std::fs;
use std::future::Future;
use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use indexmap::IndexMap;
use reqlens_core::agreement::{compare_tables, load_ratings, AgreementReport, Axis, RatingTable};
use reqlens_core::corpus::{load_corpus, Format, Level};
use reqlens_core::llm_bridge::is_safe_rater_id;
use reqlens_core::quality_rules::{analyze_corpus, RULES_RATER_ID};
use reqlens_core::taxonomy::classify_corpus;
use reqlens_core::{
    ClassificationRecord, Finding, Kind, QualityReport, RequirementSet, RuleConfig, TaxonomyConfig, Verdict,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use store::{new_token, Session, SessionMeta, SessionStatus, StoreError};

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub corpora: Vec<PathBuf>,
    /// Directory holding the annotation UI bundle; a placeholder page is
    /// served when absent.
    pub ui_dir: Option<PathBuf>,
    pub rules: RuleConfig,
    pub taxonomy: TaxonomyConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error("cannot load corpus {path}: {message}")]
    Corpus { path: PathBuf, message: String },
    #[error("corpus name {0:?} is used by more than one file")]
    DuplicateCorpus(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("server failed: {0}")]
    Serve(std::io::Error),
}

struct Corpus {
    set: RequirementSet,
    report: QualityReport,
    classes: Vec<ClassificationRecord>,
}

pub struct AppState {
    data_dir: PathBuf,
    ui_dir: Option<PathBuf>,
    corpora: IndexMap<String, Corpus>,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
}

impl AppState {
    /// Loads corpora, runs the rule analyzer over each, and replays every
    /// session found under `data_dir/sessions`.
    pub fn open(config: &ServiceConfig) -> Result<Arc<AppState>, StartupError> {
        let mut corpora = IndexMap::new();
        for path in &config.corpora {
            let set = load_corpus(path, Format::Auto)
                .map_err(|e| StartupError::Corpus { path: path.clone(), message: e.to_string() })?;
            if corpora.contains_key(&set.name) {
                return Err(StartupError::DuplicateCorpus(set.name));
            }
            let report = analyze_corpus(&set, &config.rules);
            let classes = classify_corpus(&set, &config.taxonomy);
            corpora.insert(set.name.clone(), Corpus { set, report, classes });
        }
        let root = config.data_dir.join("sessions");
        fs::create_dir_all(&root).map_err(|source| StoreError::Io { path: root.clone(), source })?;
        let mut sessions = HashMap::new();
        let mut dirs: Vec<PathBuf> = fs::read_dir(&root)
            .map_err(|source| StoreError::Io { path: root.clone(), source })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(store::SESSION_FILE).is_file())
            .collect();
        dirs.sort();
        for dir in dirs {
            let session = Session::open(&dir, |meta| {
                corpora.get(&meta.corpus_name).map(|c: &Corpus| c.set.iter().map(|r| r.id.clone()).collect())
            });
            match session {
                Ok(s) => {
                    sessions.insert(s.meta.session_id.clone(), Arc::new(s));
                }
                // a session over a corpus not served this time stays on disk
                Err(e) => log::warn!("skipping session: {e}"),
            }
        }
        Ok(Arc::new(AppState {
            data_dir: config.data_dir.clone(),
            ui_dir: config.ui_dir.clone(),
            corpora,
            sessions: RwLock::new(sessions),
        }))
    }

    fn session(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        self.sessions.read().expect("session map").get(id).cloned().ok_or(ApiError::UnknownSession)
    }

    /// One rating table for `axis` from the named rater's results over a
    /// corpus: the built-in rule analyzer or a rater directory under
    /// `data_dir/raters/<corpus>/<rater_id>/`.
    fn rater_table(&self, corpus: &str, rater: &str, axis: Axis) -> Result<RatingTable, ApiError> {
        let c = self.corpora.get(corpus).ok_or_else(|| ApiError::UnknownCorpus(corpus.to_string()))?;
        if rater == RULES_RATER_ID {
            return Ok(match axis {
                Axis::FnF => reqlens_core::agreement::fnf_table(&c.classes),
                Axis::Criterion(k) => reqlens_core::agreement::criterion_table(&c.report, k),
            });
        }
        if !is_safe_rater_id(rater) {
            return Err(ApiError::UnknownRater(rater.to_string()));
        }
        let dir = self.rater_dir(corpus, rater);
        if !dir.is_dir() {
            return Err(ApiError::UnknownRater(rater.to_string()));
        }
        load_ratings(&dir, axis).map_err(|e| ApiError::Internal(e.to_string()))
    }

    pub fn rater_dir(&self, corpus: &str, rater: &str) -> PathBuf {
        self.data_dir.join("raters").join(corpus).join(rater)
    }
}

#[derive(Debug)]
pub enum ApiError {
    UnknownCorpus(String),
    UnknownSession,
    UnknownRater(String),
    OutOfScope(String),
    InvalidLabel(String),
    InvalidRequest(String),
    SessionClosed,
    SessionNotComplete { done: usize, total: usize },
    Agreement(String),
    NotFound,
    Internal(String),
}

impl ApiError {
    fn parts(&self) -> (StatusCode, &'static str, String) {
        use ApiError::*;
        match self {
            UnknownCorpus(name) => (StatusCode::NOT_FOUND, "UnknownCorpus", format!("no corpus named {name:?}")),
            UnknownSession => (StatusCode::NOT_FOUND, "UnknownSession", "no such session".into()),
            UnknownRater(r) => (StatusCode::NOT_FOUND, "UnknownRater", format!("no results for rater {r:?} on this corpus")),
            OutOfScope(d) => (StatusCode::UNPROCESSABLE_ENTITY, "OutOfScope", d.clone()),
            InvalidLabel(d) => (StatusCode::UNPROCESSABLE_ENTITY, "InvalidLabel", d.clone()),
            InvalidRequest(d) => (StatusCode::UNPROCESSABLE_ENTITY, "InvalidRequest", d.clone()),
            SessionClosed => (StatusCode::CONFLICT, "SessionClosed", "session is complete; labels are final".into()),
            SessionNotComplete { done, total } => {
                (StatusCode::CONFLICT, "SessionNotComplete", format!("{done} of {total} cells annotated"))
            }
            Agreement(d) => (StatusCode::UNPROCESSABLE_ENTITY, "AgreementUndefined", d.clone()),
            NotFound => (StatusCode::NOT_FOUND, "NotFound", "no such resource".into()),
            Internal(d) => (StatusCode::INTERNAL_SERVER_ERROR, "Internal", d.clone()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code, detail) = self.parts();
        (status, Json(json!({ "error": code, "detail": detail }))).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::InvalidRequest(e.body_text())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::Internal(e.to_string())
    }
}

// ---- wire types -----------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub corpus_name: String,
    pub annotator_alias: String,
    #[serde(default)]
    pub axis_set: Option<Vec<Axis>>,
    #[serde(default)]
    pub blind: Option<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Progress {
    pub done: usize,
    pub total: usize,
}

#[derive(Debug, Serialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub corpus_name: String,
    pub annotator_alias: String,
    pub axis_set: Vec<Axis>,
    pub blind: bool,
    pub created_at: String,
    pub status: SessionStatus,
    pub progress: Progress,
}

/// The only view of a requirement a blind session ever sees.
#[derive(Debug, Serialize)]
pub struct BlindRequirement {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Serialize)]
#[serde(tag = "status")]
pub enum NextItem {
    Item { requirement: BlindRequirement, axis: Axis, categories: Vec<String>, progress: Progress },
    Done { progress: Progress },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitAnnotation {
    pub requirement_id: String,
    pub axis: Axis,
    pub label: String,
    #[serde(default)]
    pub note: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Accepted {
    pub sequence_no: u64,
    pub status: SessionStatus,
    pub progress: Progress,
}

#[derive(Debug, Serialize)]
pub struct SessionExport {
    pub session_id: String,
    pub corpus_name: String,
    pub complete: bool,
    pub tables: Vec<RatingTable>,
}

#[derive(Debug, Serialize)]
pub struct SessionAgreement {
    pub session_id: String,
    pub versus: String,
    pub reports: Vec<AgreementReport>,
}

#[derive(Debug, Deserialize)]
pub struct AgreementQuery {
    pub versus: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct CorpusSummary {
    pub name: String,
    pub requirements: usize,
    pub stakeholder: usize,
    pub system: usize,
}

/// Non-blind admin view of one requirement.
#[derive(Debug, Serialize)]
pub struct AdminRequirement {
    pub id: String,
    pub text: String,
    pub level: Level,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind_hint: Option<Kind>,
    pub findings: Vec<Finding>,
    pub criterion_verdicts: IndexMap<String, Verdict>,
    pub rule_class: Option<String>,
}

// ---- handlers -------------------------------------------------------------

fn info(session: &Session) -> SessionInfo {
    let view = session.view();
    SessionInfo {
        session_id: session.meta.session_id.clone(),
        corpus_name: session.meta.corpus_name.clone(),
        annotator_alias: session.meta.annotator_alias.clone(),
        axis_set: session.meta.axis_set.clone(),
        blind: session.meta.blind,
        created_at: session.meta.created_at.to_rfc3339(),
        status: session.status_of(&view),
        progress: Progress { done: session.done(&view), total: session.cells.len() },
    }
}

async fn create_session(State(state): State<Arc<AppState>>, body: Result<Json<CreateSession>, JsonRejection>) -> Result<Response, ApiError> {
    let Json(req) = body?;
    let corpus = state.corpora.get(&req.corpus_name).ok_or_else(|| ApiError::UnknownCorpus(req.corpus_name.clone()))?;
    let alias = req.annotator_alias.trim().to_string();
    if !is_safe_rater_id(&alias) {
        return Err(ApiError::InvalidRequest(format!(
            "annotator_alias {alias:?} must be non-empty and use only letters, digits, '.', '_' or '-'"
        )));
    }
    if alias == RULES_RATER_ID {
        return Err(ApiError::InvalidRequest(format!("annotator_alias {alias:?} is reserved")));
    }
    let mut axes = req.axis_set.unwrap_or_else(|| vec![Axis::FnF]);
    axes.sort();
    axes.dedup();
    if axes.is_empty() {
        return Err(ApiError::InvalidRequest("axis_set is empty".into()));
    }
    let meta = SessionMeta {
        session_id: new_token(),
        corpus_name: req.corpus_name.clone(),
        annotator_alias: alias,
        axis_set: axes,
        blind: req.blind.unwrap_or(true),
        created_at: Utc::now(),
    };
    let items: Vec<String> = corpus.set.iter().map(|r| r.id.clone()).collect();
    let root = state.data_dir.join("sessions");
    let session = tokio::task::spawn_blocking(move || Session::create(&root, meta, &items))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    let session = Arc::new(session);
    state.sessions.write().expect("session map").insert(session.meta.session_id.clone(), session.clone());
    Ok((StatusCode::CREATED, Json(info(&session))).into_response())
}

async fn get_session(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionInfo>, ApiError> {
    let session = state.session(&id)?;
    Ok(Json(info(&session)))
}

async fn fetch_next(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<NextItem>, ApiError> {
    let session = state.session(&id)?;
    let view = session.view();
    let progress = Progress { done: session.done(&view), total: session.cells.len() };
    let Some((item, axis)) = session.next_cell(&view) else {
        return Ok(Json(NextItem::Done { progress }));
    };
    let req = state.corpora[&session.meta.corpus_name].set.get(item).expect("session cells come from the corpus");
    Ok(Json(NextItem::Item {
        requirement: BlindRequirement { id: req.id.clone(), text: req.text.clone() },
        axis: *axis,
        categories: axis.category_set(),
        progress,
    }))
}

async fn submit_annotation(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<SubmitAnnotation>, JsonRejection>,
) -> Result<Json<Accepted>, ApiError> {
    let Json(req) = body?;
    let session = state.session(&id)?;
    if !session.cells.iter().any(|(i, a)| *i == req.requirement_id && *a == req.axis) {
        return Err(ApiError::OutOfScope(format!("{} on {} is not part of this session", req.requirement_id, req.axis)));
    }
    if !req.axis.category_set().contains(&req.label) {
        return Err(ApiError::InvalidLabel(format!(
            "{:?} is not one of {} for {}",
            req.label,
            req.axis.category_set().join(", "),
            req.axis
        )));
    }
    let note = req.note.filter(|n| !n.trim().is_empty());
    let writer = session.clone();
    let seq = tokio::task::spawn_blocking(move || writer.append(&req.requirement_id, req.axis, &req.label, note))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??
        .ok_or(ApiError::SessionClosed)?;
    let view = session.view();
    Ok(Json(Accepted {
        sequence_no: seq,
        status: session.status_of(&view),
        progress: Progress { done: session.done(&view), total: session.cells.len() },
    }))
}

async fn session_agreement(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<AgreementQuery>,
) -> Result<Json<SessionAgreement>, ApiError> {
    let session = state.session(&id)?;
    let versus = q.versus.filter(|v| !v.is_empty()).ok_or_else(|| ApiError::InvalidRequest("missing query parameter versus".into()))?;
    let view = session.view();
    if session.status_of(&view) != SessionStatus::Complete {
        return Err(ApiError::SessionNotComplete { done: session.done(&view), total: session.cells.len() });
    }
    let mut reports = Vec::new();
    for table in session.rating_tables(&view) {
        let axis = table.axis.expect("session tables carry their axis");
        let other = state.rater_table(&session.meta.corpus_name, &versus, axis)?;
        let joined = RatingTable::join(&[&table, &other]).map_err(|e| ApiError::Agreement(e.to_string()))?;
        reports.push(compare_tables(&joined).map_err(|e| ApiError::Agreement(format!("{axis}: {e}")))?);
    }
    Ok(Json(SessionAgreement { session_id: id, versus, reports }))
}

async fn export_session(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionExport>, ApiError> {
    let session = state.session(&id)?;
    let view = session.view();
    Ok(Json(SessionExport {
        session_id: id,
        corpus_name: session.meta.corpus_name.clone(),
        complete: session.status_of(&view) == SessionStatus::Complete,
        tables: session.rating_tables(&view),
    }))
}

async fn list_corpora(State(state): State<Arc<AppState>>) -> Json<Vec<CorpusSummary>> {
    Json(
        state
            .corpora
            .values()
            .map(|c| CorpusSummary {
                name: c.set.name.clone(),
                requirements: c.set.len(),
                stakeholder: c.set.count_level(Level::Stakeholder),
                system: c.set.count_level(Level::System),
            })
            .collect(),
    )
}

async fn corpus_requirements(
    State(state): State<Arc<AppState>>,
    UrlPath(name): UrlPath<String>,
) -> Result<Json<Vec<AdminRequirement>>, ApiError> {
    let c = state.corpora.get(&name).ok_or(ApiError::UnknownCorpus(name))?;
    let rows = c
        .set
        .iter()
        .map(|r| AdminRequirement {
            id: r.id.clone(),
            text: r.text.clone(),
            level: r.level,
            kind_hint: r.kind_hint,
            findings: c.report.findings(&r.id).to_vec(),
            criterion_verdicts: c
                .report
                .criterion_verdicts
                .get(&r.id)
                .map(|m| m.iter().map(|(k, v)| (k.to_string(), *v)).collect())
                .unwrap_or_default(),
            rule_class: c.classes.iter().find(|x| x.requirement_id == r.id).map(|x| x.class.to_string()),
        })
        .collect();
    Ok(Json(rows))
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

const PLACEHOLDER_PAGE: &str = "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>reqlens</title></head>\
<body><h1>reqlens annotation service</h1><p>No UI bundle is mounted. Start the server with <code>--ui-dir</code> \
or use the REST API directly.</p></body></html>\n";

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).unwrap_or("") {
        "html" | "htm" => "text/html; charset=utf-8",
        "js" | "mjs" => "text/javascript; charset=utf-8",
        "css" => "text/css; charset=utf-8",
        "json" | "map" => "application/json",
        "svg" => "image/svg+xml",
        "png" => "image/png",
        "ico" => "image/x-icon",
        "woff2" => "font/woff2",
        "txt" => "text/plain; charset=utf-8",
        _ => "application/octet-stream",
    }
}

/// Static files from the UI directory; unknown paths fall back to
/// `index.html` so client-side routes resolve.
async fn static_ui(State(state): State<Arc<AppState>>, uri: Uri) -> Result<Response, ApiError> {
    let Some(root) = &state.ui_dir else {
        if uri.path() == "/" || uri.path() == "/index.html" {
            return Ok(([(header::CONTENT_TYPE, "text/html; charset=utf-8")], PLACEHOLDER_PAGE).into_response());
        }
        return Err(ApiError::NotFound);
    };
    let rel = Path::new(uri.path().trim_start_matches('/'));
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return Err(ApiError::NotFound);
    }
    let mut path = root.join(rel);
    if !path.is_file() {
        path = root.join("index.html");
    }
    let body = tokio::task::spawn_blocking({
        let path = path.clone();
        move || fs::read(path)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))?
    .map_err(|_| ApiError::NotFound)?;
    Ok(([(header::CONTENT_TYPE, content_type(&path))], body).into_response())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/next", get(fetch_next))
        .route("/sessions/{id}/annotations", post(submit_annotation))
        .route("/sessions/{id}/agreement", get(session_agreement))
        .route("/sessions/{id}/export", get(export_session))
        .route("/corpora", get(list_corpora))
        .route("/corpora/{name}/requirements", get(corpus_requirements))
        .fallback(get(static_ui))
        .with_state(state)
}

/// Runs until `shutdown` resolves, then drains in-flight requests.
pub async fn serve(
    config: ServiceConfig,
    addr: SocketAddr,
    shutdown: impl Future<Output = ()> + Send + 'static,
    on_bound: impl FnOnce(SocketAddr),
) -> Result<(), StartupError> {
    let state = AppState::open(&config)?;
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|source| StartupError::Bind { addr, source })?;
    on_bound(listener.local_addr().map_err(StartupError::Serve)?);
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await.map_err(StartupError::Serve)
}
