use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use super::store::{AnnotationError, NextItem, ProtocolConfig, RatingStore, WORKER_QUOTA};

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub image_root: PathBuf,
    pub log_path: PathBuf,
    pub ui_dir: Option<PathBuf>,
    pub seed: u64,
    pub quota: usize,
}

impl ServiceConfig {
    pub fn new(image_root: impl Into<PathBuf>, log_path: impl Into<PathBuf>, seed: u64) -> Self {
        Self {
            image_root: image_root.into(),
            log_path: log_path.into(),
            ui_dir: None,
            seed,
            quota: WORKER_QUOTA,
        }
    }
}

/// Shared handler state. The store mutex is the single log writer, which
/// makes the duplicate check atomic with the append.
#[derive(Clone)]
pub struct AppState {
    store: Arc<Mutex<RatingStore>>,
    image_root: PathBuf,
}

impl std::fmt::Debug for AppState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AppState").field("image_root", &self.image_root).finish()
    }
}

fn list_images(root: &Path) -> Result<Vec<String>, AnnotationError> {
    if !root.is_dir() {
        return Err(AnnotationError::Startup(format!("image root {} is not a directory", root.display())));
    }
    let mut ids = Vec::new();
    for entry in std::fs::read_dir(root)? {
        let path = entry?.path();
        let ok = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if ok && path.is_file() {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                ids.push(name.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

impl AppState {
    /// Scans the image root and replays the rating log.
    pub fn open(config: &ServiceConfig) -> Result<Self, AnnotationError> {
        let images = list_images(&config.image_root)?;
        let mut protocol = ProtocolConfig::new(images, config.seed);
        protocol.quota = config.quota;
        let store = RatingStore::open(&config.log_path, protocol)?;
        Ok(Self {
            store: Arc::new(Mutex::new(store)),
            image_root: config.image_root.clone(),
        })
    }

    pub fn store(&self) -> MutexGuard<'_, RatingStore> {
        // a panicked handler cannot leave the log half-applied: the append
        // happens before any in-memory update
        self.store.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Syncs the log and writes a final snapshot.
    pub fn flush(&self) -> Result<(), AnnotationError> {
        self.store().flush()
    }
}

struct ApiError(AnnotationError);

impl From<AnnotationError> for ApiError {
    fn from(e: AnnotationError) -> Self {
        Self(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self.0 {
            AnnotationError::Quota(_) => (StatusCode::FORBIDDEN, "quota"),
            AnnotationError::Validation(_) => (StatusCode::BAD_REQUEST, "validation"),
            AnnotationError::Ordering { .. } => (StatusCode::CONFLICT, "ordering"),
            AnnotationError::Conflict { .. } => (StatusCode::CONFLICT, "conflict"),
            AnnotationError::UnknownSession(_) | AnnotationError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            AnnotationError::Log(_) | AnnotationError::Startup(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        (status, Json(json!({ "error": kind, "message": self.0.to_string() }))).into_response()
    }
}

fn image_url(id: &str) -> String {
    format!("/images/{id}")
}

fn parse_body(body: &[u8]) -> Result<Value, ApiError> {
    serde_json::from_slice::<Value>(body)
        .ok()
        .filter(Value::is_object)
        .ok_or_else(|| ApiError(AnnotationError::Validation("body must be a JSON object".into())))
}

fn field<'a>(body: &'a Value, name: &str) -> Result<&'a Value, ApiError> {
    body.get(name)
        .ok_or_else(|| ApiError(AnnotationError::Validation(format!("missing field {name:?}"))))
}

fn string_field(body: &Value, name: &str) -> Result<String, ApiError> {
    match field(body, name)?.as_str() {
        Some(s) if !s.is_empty() => Ok(s.to_string()),
        _ => Err(ApiError(AnnotationError::Validation(format!("{name} must be a non-empty string")))),
    }
}

fn int_field(body: &Value, name: &str) -> Result<i64, ApiError> {
    field(body, name)?
        .as_i64()
        .ok_or_else(|| ApiError(AnnotationError::Validation(format!("{name} must be an integer"))))
}

async fn open_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let body = parse_body(&body)?;
    let worker = string_field(&body, "worker_id")?;
    let mut store = state.store();
    let protocol = store.protocol_mut();
    let session_id = protocol.open_session(&worker)?.session_id.clone();
    let remaining = protocol.remaining_quota(&worker);
    Ok((
        StatusCode::CREATED,
        Json(json!({ "session_id": session_id, "remaining_quota": remaining })),
    )
        .into_response())
}

async fn next_item(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let next = state.store().protocol_mut().next_item(&id)?;
    Ok(match next {
        NextItem::Complete => StatusCode::NO_CONTENT.into_response(),
        NextItem::Rate { image_id, previous } => {
            let previous = previous.map(|p| {
                json!({
                    "image_id": p.image_id,
                    "image_url": image_url(&p.image_id),
                    "valence": p.valence,
                    "arousal": p.arousal,
                })
            });
            Json(json!({
                "image_id": image_id,
                "image_url": image_url(&image_id),
                "previous": previous,
            }))
            .into_response()
        }
    })
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

async fn submit_rating(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let body = parse_body(&body)?;
    let image_id = string_field(&body, "image_id")?;
    let valence = int_field(&body, "valence")?;
    let arousal = int_field(&body, "arousal")?;
    let mut store = state.store();
    // unknown session must surface as 404 before value validation
    store.protocol().session(&id)?;
    let event = store.submit(&id, &image_id, valence, arousal, now())?;
    let remaining = store.protocol().remaining_quota(&event.worker_id);
    Ok((StatusCode::CREATED, Json(json!({ "rating": event, "remaining_quota": remaining }))).into_response())
}

async fn image(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    if !state.store().protocol().has_image(&id) {
        return Err(AnnotationError::NotFound(id).into());
    }
    let bytes = std::fs::read(state.image_root.join(&id)).map_err(|_| AnnotationError::NotFound(id.clone()))?;
    let lower = id.to_ascii_lowercase();
    let mime = if lower.ends_with(".png") { "image/png" } else { "image/jpeg" };
    Ok(([(header::CONTENT_TYPE, mime)], bytes).into_response())
}

async fn aggregates(State(state): State<AppState>) -> Response {
    let all = state.store().protocol().aggregates();
    Json(all).into_response()
}

/// The HTTP API, plus the UI directory as a fallback when configured.
pub fn router(state: AppState, ui_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/sessions", post(open_session))
        .route("/sessions/{id}/next", get(next_item))
        .route("/sessions/{id}/ratings", post(submit_rating))
        .route("/images/{id}", get(image))
        .route("/aggregates", get(aggregates))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}
