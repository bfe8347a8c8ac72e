//! HTTP JSON API over one ingested model.
//!
//! Each session holds its chat history server-side. A session runs at most
//! one agent turn at a time; a second message while one is running gets 409.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ifcnav_core::agent::{Agent, AgentError, AgentState, BackendRole, Conversation, Termination, PROMPT_VERSION};
use ifcnav_core::app::{build_scene, HighlightSpec, LoadedModel, SceneDocument, SceneError};
use ifcnav_core::graph::{GraphError, NodeRef, PathWeight};
use ifcnav_core::store::{table_names, SchemaSummary};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: Uuid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MessageRequest {
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MessageResponse {
    pub session_id: Uuid,
    pub answer: String,
    pub termination: Termination,
    pub incomplete: bool,
    /// Backend that produced the final answer.
    pub backend: BackendRole,
    pub iterations: usize,
    pub trace: AgentState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub retryable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<AgentState>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub source: String,
    pub counts: BTreeMap<String, usize>,
    pub nodes: usize,
    pub edges: usize,
    pub schema: SchemaSummary,
    pub graph_summary: String,
    pub prompt_version: String,
}

#[derive(Clone, Debug, Default, Deserialize)]
pub struct SceneParams {
    #[serde(default)]
    pub meshes: bool,
    pub from: Option<String>,
    pub to: Option<String>,
    #[serde(default)]
    pub weight: PathWeight,
}

type SessionHandle = Arc<tokio::sync::Mutex<Conversation>>;

pub struct ServiceState {
    model: LoadedModel,
    agent: Agent,
    summary: ModelSummary,
    sessions: Mutex<HashMap<Uuid, SessionHandle>>,
    data_dir: Option<PathBuf>,
    auth_token: Option<String>,
}

impl ServiceState {
    /// Loads persisted sessions from `data_dir/sessions` when given.
    pub fn new(model: LoadedModel, agent: Agent, data_dir: Option<PathBuf>) -> std::io::Result<Self> {
        let mut counts = BTreeMap::new();
        for t in table_names() {
            counts.insert(t.to_owned(), model.store.count(t).map_err(std::io::Error::other)?);
        }
        let summary = ModelSummary {
            source: model.paths.db.display().to_string(),
            counts,
            nodes: model.graph.node_count(),
            edges: model.graph.edge_count(),
            schema: model.store.summarize().map_err(std::io::Error::other)?,
            graph_summary: model.graph.summary_text(),
            prompt_version: PROMPT_VERSION.to_owned(),
        };
        let mut sessions = HashMap::new();
        if let Some(dir) = &data_dir {
            let dir = dir.join("sessions");
            std::fs::create_dir_all(&dir)?;
            for entry in std::fs::read_dir(&dir)? {
                let path = entry?.path();
                let id = path.file_stem().and_then(|s| s.to_str()).and_then(|s| Uuid::parse_str(s).ok());
                let Some(id) = id else { continue };
                match serde_json::from_str::<Conversation>(&std::fs::read_to_string(&path)?) {
                    Ok(c) => {
                        sessions.insert(id, Arc::new(tokio::sync::Mutex::new(c)));
                    }
                    Err(e) => log::warn!("skipping unreadable session file {}: {e}", path.display()),
                }
            }
        }
        Ok(ServiceState { model, agent, summary, sessions: Mutex::new(sessions), data_dir, auth_token: None })
    }

    /// Requires `Authorization: Bearer <token>` on every route but /health.
    pub fn with_auth_token(mut self, token: Option<String>) -> Self {
        self.auth_token = token;
        self
    }

    fn session(&self, id: &Uuid) -> Option<SessionHandle> {
        self.sessions.lock().expect("session map").get(id).cloned()
    }

    fn persist(&self, id: &Uuid, conversation: &Conversation) {
        let Some(dir) = &self.data_dir else { return };
        let path = dir.join("sessions").join(format!("{id}.json"));
        let text = serde_json::to_string(conversation).expect("conversation serializes");
        if let Err(e) = std::fs::write(&path, text) {
            log::error!("cannot persist session {id}: {e}");
        }
    }
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    let body = ErrorBody { error: message.into(), retryable: false, trace: None };
    (status, Json(body)).into_response()
}

fn authorized(state: &ServiceState, headers: &HeaderMap) -> Result<(), Response> {
    let Some(token) = &state.auth_token else { return Ok(()) };
    let given = headers
        .get(axum::http::header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if given == Some(token.as_str()) {
        Ok(())
    } else {
        Err(error(StatusCode::UNAUTHORIZED, "missing or wrong bearer token"))
    }
}

async fn health() -> Json<Health> {
    Json(Health { status: "ok".into(), version: env!("CARGO_PKG_VERSION").into() })
}

async fn create_session(State(state): State<Arc<ServiceState>>, headers: HeaderMap) -> Response {
    if let Err(r) = authorized(&state, &headers) {
        return r;
    }
    let id = Uuid::new_v4();
    let conversation = Conversation::default();
    state.persist(&id, &conversation);
    state.sessions.lock().expect("session map").insert(id, Arc::new(tokio::sync::Mutex::new(conversation)));
    (StatusCode::CREATED, Json(SessionCreated { session_id: id })).into_response()
}

async fn post_message(
    State(state): State<Arc<ServiceState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Result<Json<MessageRequest>, axum::extract::rejection::JsonRejection>,
) -> Response {
    if let Err(r) = authorized(&state, &headers) {
        return r;
    }
    let Some((id, handle)) = Uuid::parse_str(&id).ok().and_then(|id| Some((id, state.session(&id)?))) else {
        return error(StatusCode::NOT_FOUND, format!("unknown session {id}"));
    };
    let Json(request) = match body {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.body_text()),
    };
    if request.text.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "message text is empty");
    }
    let Ok(mut guard) = handle.try_lock_owned() else {
        return error(StatusCode::CONFLICT, "session is busy with another message");
    };
    let worker = state.clone();
    let outcome = tokio::task::spawn_blocking(move || {
        let result = worker.agent.run(worker.model.stores(), &mut guard, &request.text);
        worker.persist(&id, &guard);
        result
    })
    .await;
    match outcome {
        Ok(Ok(run)) => {
            let backend = run.state.calls.last().map_or(BackendRole::Primary, |c| c.role);
            Json(MessageResponse {
                session_id: id,
                answer: run.answer,
                termination: run.termination,
                incomplete: run.incomplete,
                backend,
                iterations: run.state.iter,
                trace: run.state,
            })
            .into_response()
        }
        Ok(Err(failure)) => {
            let (status, retryable) = match &failure.error {
                AgentError::BackendUnavailable { retryable, .. } => (StatusCode::SERVICE_UNAVAILABLE, *retryable),
                AgentError::TranscriptExhausted { .. } => (StatusCode::SERVICE_UNAVAILABLE, false),
                _ => (StatusCode::INTERNAL_SERVER_ERROR, false),
            };
            let body = ErrorBody { error: failure.error.to_string(), retryable, trace: Some(*failure.state) };
            (status, Json(body)).into_response()
        }
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, format!("agent task failed: {e}")),
    }
}

async fn model_summary(State(state): State<Arc<ServiceState>>, headers: HeaderMap) -> Response {
    if let Err(r) = authorized(&state, &headers) {
        return r;
    }
    Json(state.summary.clone()).into_response()
}

async fn model_scene(
    State(state): State<Arc<ServiceState>>,
    headers: HeaderMap,
    Query(params): Query<SceneParams>,
) -> Response {
    if let Err(r) = authorized(&state, &headers) {
        return r;
    }
    let highlight = match (params.from, params.to) {
        (Some(from), Some(to)) => {
            Some(HighlightSpec { from: NodeRef::Text(from), to: NodeRef::Text(to), weight: params.weight })
        }
        (None, None) => None,
        _ => return error(StatusCode::BAD_REQUEST, "give both from and to, or neither"),
    };
    let meshes = params.meshes.then_some(&state.model.store);
    match build_scene(&state.model.graph, highlight.as_ref(), meshes) {
        Ok(scene) => Json::<SceneDocument>(scene).into_response(),
        Err(SceneError::Graph(e @ (GraphError::NodeNotFound(_) | GraphError::AmbiguousNode { .. }))) => {
            error(StatusCode::NOT_FOUND, e.to_string())
        }
        Err(SceneError::Graph(e @ GraphError::NoPath { .. })) => error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/model/summary", get(model_summary))
        .route("/model/scene", get(model_scene))
        .with_state(state)
}
