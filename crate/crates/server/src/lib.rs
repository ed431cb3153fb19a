//! HTTP front end for [`GameEngine`].
//!
//! Every handler takes the engine lock for the duration of one operation, so
//! per-session requests are serialized and the exposure ledger has a single
//! writer.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use scenemem_core::corpus::{CorpusIndex, ImageId};
use scenemem_core::game::{GameEngine, GameError};
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;

pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64)
    })
}

#[derive(Clone)]
pub struct AppState {
    engine: Arc<Mutex<GameEngine>>,
    images: Arc<BTreeMap<ImageId, PathBuf>>,
    clock: Clock,
}

impl AppState {
    pub fn new(engine: GameEngine) -> Self {
        AppState {
            engine: Arc::new(Mutex::new(engine)),
            images: Arc::new(BTreeMap::new()),
            clock: system_clock(),
        }
    }

    /// Serve image files for `corpus`, resolving its relative paths against
    /// `root`.
    pub fn with_images(mut self, corpus: &CorpusIndex, root: &std::path::Path) -> Self {
        self.images = Arc::new(
            corpus
                .images
                .iter()
                .map(|r| (r.image_id.clone(), root.join(&r.path)))
                .collect(),
        );
        self
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn engine(&self) -> MutexGuard<'_, GameEngine> {
        // a panic while holding the lock leaves the engine consistent: state
        // only changes after the log append succeeds
        self.engine.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn now(&self) -> u64 {
        (self.clock)()
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, error: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                error: error.into(),
                message: message.into(),
            },
        }
    }
}

impl From<GameError> for ApiError {
    fn from(e: GameError) -> Self {
        let (status, kind) = match &e {
            GameError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            GameError::SessionCompleted(_) => (StatusCode::CONFLICT, "session_completed"),
            GameError::SessionAbandoned(_) => (StatusCode::CONFLICT, "session_abandoned"),
            GameError::SessionActive(_) => (StatusCode::CONFLICT, "session_active"),
            GameError::OutOfOrder { .. } => (StatusCode::CONFLICT, "out_of_order"),
            GameError::DuplicateResponse(_) => (StatusCode::CONFLICT, "duplicate_response"),
            GameError::PoolExhausted { .. } => (StatusCode::CONFLICT, "pool_exhausted"),
            GameError::InvalidSubject => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_subject"),
            GameError::Sequencer(_) => (StatusCode::INTERNAL_SERVER_ERROR, "sequencer"),
            GameError::Io(_) | GameError::Corrupt { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "storage"),
        };
        if status.is_server_error() {
            tracing::error!("{e}");
        }
        ApiError::new(status, kind, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "bad_request", e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Serialize, Deserialize)]
pub struct StartRequest {
    pub subject_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StartResponse {
    pub session_id: String,
    pub subject_id: String,
    pub slots: usize,
    pub cursor: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ResponseRequest {
    pub slot: usize,
    pub pressed: bool,
    #[serde(default)]
    pub reaction_time_ms: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub sessions: usize,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(start_session))
        .route("/sessions/{id}/next", get(next_stimulus))
        .route("/sessions/{id}/responses", post(record_response))
        .route("/sessions/{id}/summary", get(summary))
        .route("/images/{id}", get(image))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

async fn health(State(st): State<AppState>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        sessions: st.engine().state().sessions.len(),
    })
}

async fn start_session(
    State(st): State<AppState>,
    body: Result<Json<StartRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<StartResponse>), ApiError> {
    let Json(req) = body?;
    let now = st.now();
    let s = st.engine().start_session(&req.subject_id, now)?;
    Ok((
        StatusCode::CREATED,
        Json(StartResponse {
            session_id: s.session_id,
            subject_id: s.subject_id,
            slots: s.plan.len(),
            cursor: s.cursor,
        }),
    ))
}

async fn next_stimulus(
    State(st): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<scenemem_core::game::StimulusDescriptor> {
    let now = st.now();
    Ok(Json(st.engine().next_stimulus(&id, now)?))
}

async fn record_response(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<ResponseRequest>, JsonRejection>,
) -> ApiResult<scenemem_core::game::ResponseEvent> {
    let Json(req) = body?;
    let now = st.now();
    let event = st
        .engine()
        .record_response(&id, req.slot, req.pressed, req.reaction_time_ms, now)?;
    Ok(Json(event))
}

async fn summary(
    State(st): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<scenemem_core::game::SessionSummary> {
    Ok(Json(st.engine().session_summary(&id)?))
}

async fn image(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let path = st
        .images
        .get(&id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_image", format!("unknown image `{id}`")))?;
    let bytes = tokio::fs::read(path)
        .await
        .map_err(|e| ApiError::new(StatusCode::NOT_FOUND, "unknown_image", format!("{}: {e}", path.display())))?;
    let mime = match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("gif") => "image/gif",
        Some("bmp") => "image/bmp",
        Some("webp") => "image/webp",
        _ => "application/octet-stream",
    };
    Ok(([(header::CONTENT_TYPE, mime)], bytes).into_response())
}

/// Periodically marks idle sessions abandoned.
pub fn spawn_sweeper(state: AppState, every: Duration) -> tokio::task::JoinHandle<()> {
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(every);
        tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        loop {
            tick.tick().await;
            let now = state.now();
            match state.engine().sweep_idle(now) {
                Ok(ids) if !ids.is_empty() => tracing::info!("abandoned {} idle sessions", ids.len()),
                Ok(_) => {}
                Err(e) => tracing::error!("idle sweep failed: {e}"),
            }
        }
    })
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
