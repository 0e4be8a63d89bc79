use std::fs::File;
use std::io::Write;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use meddm_core::engine::{self, EngineConfig, Role};
use meddm_core::retrieval::{rewrite_dialogue, RetrievalError, Rewriter};
use meddm_core::{serialize_ieet, DialogueHistory, Event, Judge, Kb, NodeId, Session, Status, TreeKind};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::ApiError;
use crate::store::SessionStore;

pub struct AppState {
    pub kb: Arc<Kb>,
    pub judge: Arc<dyn Judge>,
    pub rewriter: Option<Arc<dyn Rewriter>>,
    pub store: SessionStore,
    pub engine: EngineConfig,
    pub log: Option<Mutex<File>>,
}

impl AppState {
    fn log_events(&self, session: &Session, from: usize) {
        let Some(log) = &self.log else { return };
        let mut f = log.lock().expect("log poisoned");
        for ev in &session.events[from..] {
            let line = json!({"session_id": session.id, "tree_id": session.tree_id, "event": ev});
            if let Err(e) = writeln!(f, "{line}") {
                tracing::error!(error = %e, "cannot append to transcript log");
                return;
            }
        }
    }
}

pub const DEFAULT_RETRIEVE_K: usize = 5;

#[derive(Serialize)]
struct TreeListing<'a> {
    id: &'a str,
    title: &'a str,
    kind: TreeKind,
    department: &'a str,
    node_count: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RetrieveRequest {
    query: String,
    #[serde(default)]
    k: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    complaint: String,
    #[serde(default)]
    tree_id: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerRequest {
    text: String,
}

#[derive(Serialize)]
struct SessionView<'a> {
    status: Status,
    history: &'a DialogueHistory,
    path: &'a [engine::PathEntry],
    tree_id: &'a str,
    current_node: NodeId,
}

fn body<T: DeserializeOwned>(raw: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(raw).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

fn unknown_tree(id: &str) -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "UNKNOWN_TREE", format!("unknown tree `{id}`"))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(format!("worker failed: {e}")))
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({"status": "ok"}))
}

async fn list_trees(State(st): State<Arc<AppState>>) -> Response {
    let rows: Vec<TreeListing> = st
        .kb
        .trees()
        .iter()
        .map(|t| TreeListing {
            id: &t.id,
            title: &t.title,
            kind: t.kind,
            department: &t.department,
            node_count: t.nodes.len(),
        })
        .collect();
    Json(rows).into_response()
}

async fn get_tree(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let tree = st.kb.get(&id).ok_or_else(|| unknown_tree(&id))?;
    Ok(Json(tree).into_response())
}

async fn get_tree_ieet(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let tree = st.kb.get(&id).ok_or_else(|| unknown_tree(&id))?;
    let doc = serialize_ieet(tree)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "IEET_UNAVAILABLE", e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], doc.text).into_response())
}

async fn post_retrieve(State(st): State<Arc<AppState>>, raw: Bytes) -> Result<Response, ApiError> {
    let req: RetrieveRequest = body(&raw)?;
    let hits = st.kb.retrieve(&req.query, req.k.unwrap_or(DEFAULT_RETRIEVE_K)).map_err(|e| match e {
        RetrievalError::InvalidK => ApiError::new(StatusCode::BAD_REQUEST, "INVALID_K", e.to_string()),
        other => ApiError::internal(other.to_string()),
    })?;
    Ok(Json(hits).into_response())
}

async fn create_session(State(st): State<Arc<AppState>>, raw: Bytes) -> Result<Response, ApiError> {
    let req: CreateSession = body(&raw)?;
    if req.complaint.trim().is_empty() {
        return Err(engine::EngineError::EmptyComplaint.into());
    }
    st.store.evict_expired();
    let id = st.store.fresh_id();
    let state = st.clone();
    let (session, event) = blocking(move || {
        let tree_id = match req.tree_id {
            Some(t) => t,
            None => {
                let mut h = DialogueHistory::default();
                h.push(Role::Patient, req.complaint.as_str());
                let (query, warning) = rewrite_dialogue(&h, state.rewriter.as_deref());
                if let Some(w) = warning {
                    tracing::warn!("{w}");
                }
                let best = state.kb.retrieve(&query, 1).map_err(|e| ApiError::internal(e.to_string()))?;
                best[0].tree_id.clone()
            }
        };
        engine::start(&state.kb, id, &req.complaint, Some(&tree_id), state.judge.as_ref(), &state.engine)
            .map_err(ApiError::from)
    })
    .await??;
    st.log_events(&session, 0);
    let session_id = session.id.clone();
    st.store.insert(session);
    Ok((StatusCode::CREATED, Json(json!({"session_id": session_id, "event": event}))).into_response())
}

async fn post_answer(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    raw: Bytes,
) -> Result<Response, ApiError> {
    let req: AnswerRequest = body(&raw)?;
    let shared = st.store.get(&id).ok_or_else(|| ApiError::unknown_session(&id))?;
    let mut guard = shared
        .try_lock_owned()
        .map_err(|_| ApiError::new(StatusCode::CONFLICT, "SESSION_BUSY", "another request is updating this session"))?;
    let state = st.clone();
    let event: Event = blocking(move || {
        let session = &mut *guard;
        let from = session.events.len();
        let tree = state.kb.get(&session.tree_id).ok_or_else(|| unknown_tree(&session.tree_id))?;
        let ev = engine::answer(session, tree, state.judge.as_ref(), &req.text)?;
        state.log_events(session, from);
        Ok::<_, ApiError>(ev)
    })
    .await??;
    Ok(Json(json!({"event": event})).into_response())
}

async fn get_session(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let shared = st.store.get(&id).ok_or_else(|| ApiError::unknown_session(&id))?;
    let s = shared.lock().await;
    let view = SessionView {
        status: s.status,
        history: &s.history,
        path: &s.path,
        tree_id: &s.tree_id,
        current_node: s.current,
    };
    Ok(Json(view).into_response())
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "NOT_FOUND", "no such endpoint")
}

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/trees", get(list_trees))
        .route("/trees/{id}", get(get_tree))
        .route("/trees/{id}/ieet", get(get_tree_ieet))
        .route("/retrieve", post(post_retrieve))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/answers", post(post_answer));
    Router::new().nest("/api", api).fallback(not_found).with_state(state)
}
