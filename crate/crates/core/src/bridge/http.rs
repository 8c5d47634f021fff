use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast::error::RecvError;

use super::heatmap::{heatmap, HeatmapError, Parameter};
use super::session::{SessionError, SessionHandle, SessionManager};
use super::store::{Archive, SampleFilter, SampleRecord, SampleStore, StoreError};
use super::BridgeConfig;
use crate::sim::{OperatorCommand, Scenario};

#[derive(Clone)]
pub struct AppState {
    pub sessions: Arc<Mutex<SessionManager>>,
    pub store: Arc<Mutex<SampleStore>>,
    pub config: Arc<BridgeConfig>,
}

impl AppState {
    pub fn new(config: BridgeConfig, store: Arc<Mutex<SampleStore>>) -> Self {
        let sessions = SessionManager::new(store.clone(), config.max_running, config.speed);
        Self { sessions: Arc::new(Mutex::new(sessions)), store, config: Arc::new(config) }
    }

    fn handle(&self, id: &str) -> Result<Arc<SessionHandle>, ApiError> {
        Ok(self.sessions.lock().expect("sessions lock").get(id)?)
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: &'static str,
    message: String,
}

pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl ToString) -> Self {
        Self { status, kind, message: message.to_string() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.kind, message: self.message })).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, kind) = match &e {
            SessionError::Conflict => (StatusCode::CONFLICT, "Conflict"),
            SessionError::ConfigInvalid(_) => (StatusCode::BAD_REQUEST, "ConfigInvalid"),
            SessionError::NotFound(_) => (StatusCode::NOT_FOUND, "NotFound"),
            SessionError::SessionNotRunning => (StatusCode::CONFLICT, "SessionNotRunning"),
            SessionError::BadCommand(_) => (StatusCode::BAD_REQUEST, "BadCommand"),
        };
        ApiError::new(status, kind, e)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let (status, kind) = match &e {
            StoreError::DuplicateLabel(_) => (StatusCode::CONFLICT, "DuplicateLabel"),
            StoreError::InvalidRecord(_) => (StatusCode::BAD_REQUEST, "InvalidRecord"),
            StoreError::ArchiveCorrupt(_) => (StatusCode::BAD_REQUEST, "ArchiveCorrupt"),
            StoreError::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "Io"),
        };
        ApiError::new(status, kind, e)
    }
}

impl From<HeatmapError> for ApiError {
    fn from(e: HeatmapError) -> Self {
        let kind = match &e {
            HeatmapError::UnknownParameter(_) => "UnknownParameter",
            HeatmapError::BadBin => "BadBin",
        };
        ApiError::new(StatusCode::BAD_REQUEST, kind, e)
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/sessions", get(list_sessions).post(start_session))
        .route("/api/sessions/:id", get(get_session).delete(stop_session))
        .route("/api/sessions/:id/metrics", get(session_metrics))
        .route("/api/sessions/:id/command", post(session_command))
        .route("/api/sessions/:id/pause", post(pause_session))
        .route("/api/sessions/:id/resume", post(resume_session))
        .route("/api/samples", get(list_samples).post(record_sample))
        .route("/api/heatmap", get(get_heatmap))
        .route("/api/sync/export", get(sync_export))
        .route("/api/sync/import", post(sync_import))
        .route("/ws/telemetry", get(telemetry_ws))
        .with_state(state)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct StartRequest {
    scenario: Option<serde_json::Value>,
    scenario_path: Option<PathBuf>,
    seed: Option<u64>,
}

fn config_invalid(e: impl ToString) -> ApiError {
    ApiError::new(StatusCode::BAD_REQUEST, "ConfigInvalid", e)
}

fn load_scenario(req: StartRequest, default: Option<&Path>) -> ApiResult<(Scenario, PathBuf)> {
    let (mut sc, base) = match (req.scenario, req.scenario_path) {
        (Some(_), Some(_)) => return Err(config_invalid("give either scenario or scenario_path")),
        (Some(v), None) => {
            let sc: Scenario = serde_json::from_value(v).map_err(config_invalid)?;
            (sc, std::env::current_dir().map_err(config_invalid)?)
        }
        (None, Some(p)) => Scenario::load(&p).map_err(config_invalid)?,
        (None, None) => match default {
            Some(p) => Scenario::load(p).map_err(config_invalid)?,
            None => return Err(config_invalid("no scenario given and no default configured")),
        },
    };
    if let Some(seed) = req.seed {
        sc.seed = seed;
    }
    Ok((sc, base))
}

async fn list_sessions(State(s): State<AppState>) -> impl IntoResponse {
    Json(s.sessions.lock().expect("sessions lock").list())
}

async fn start_session(State(s): State<AppState>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: StartRequest = if body.iter().all(u8::is_ascii_whitespace) {
        StartRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(config_invalid)?
    };
    let (sc, base) = load_scenario(req, s.config.default_scenario.as_deref())?;
    let resolved = sc.resolve(&base).map_err(config_invalid)?;
    let view = s.sessions.lock().expect("sessions lock").start(resolved)?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(s.handle(&id)?.view()))
}

async fn stop_session(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(s.sessions.lock().expect("sessions lock").stop(&id)?))
}

async fn pause_session(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<impl IntoResponse> {
    s.handle(&id)?.set_paused(true).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn resume_session(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<impl IntoResponse> {
    s.handle(&id)?.set_paused(false).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn session_metrics(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<impl IntoResponse> {
    let h = s.handle(&id)?;
    Ok(Json(h.metrics().await?))
}

fn parse_command(body: &[u8]) -> Result<OperatorCommand, SessionError> {
    serde_json::from_slice(body).map_err(|e| SessionError::BadCommand(e.to_string()))
}

async fn session_command(
    State(s): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let h = s.handle(&id)?;
    let cmd = parse_command(&body)?;
    Ok(Json(h.command(cmd).await?))
}

#[derive(Debug, Deserialize)]
struct SampleQuery {
    mission: Option<String>,
    param: Option<String>,
}

async fn list_samples(State(s): State<AppState>, Query(q): Query<SampleQuery>) -> ApiResult<impl IntoResponse> {
    let param = q.param.as_deref().map(str::parse::<Parameter>).transpose()?;
    let filter = SampleFilter { mission: q.mission, param };
    Ok(Json(s.store.lock().expect("store lock").list(&filter)))
}

async fn record_sample(State(s): State<AppState>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let rec: SampleRecord = serde_json::from_slice(&body).map_err(|e| ApiError::from(StoreError::InvalidRecord(e.to_string())))?;
    s.store.lock().expect("store lock").record_sample(rec.clone())?;
    Ok((StatusCode::CREATED, Json(rec)))
}

#[derive(Debug, Deserialize)]
struct HeatmapQuery {
    param: String,
    bin: Option<f64>,
    mission: Option<String>,
}

/// Default bin, about 110 m of latitude.
const DEFAULT_BIN_DEG: f64 = 0.001;

async fn get_heatmap(State(s): State<AppState>, Query(q): Query<HeatmapQuery>) -> ApiResult<impl IntoResponse> {
    let param: Parameter = q.param.parse()?;
    let records = s.store.lock().expect("store lock").list(&SampleFilter { mission: q.mission, param: None });
    Ok(Json(heatmap(&records, param, q.bin.unwrap_or(DEFAULT_BIN_DEG))?))
}

async fn sync_export(State(s): State<AppState>) -> impl IntoResponse {
    Json(s.store.lock().expect("store lock").export())
}

async fn sync_import(State(s): State<AppState>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let archive: Archive =
        serde_json::from_slice(&body).map_err(|e| ApiError::from(StoreError::ArchiveCorrupt(e.to_string())))?;
    Ok(Json(s.store.lock().expect("store lock").import(&archive)?))
}

#[derive(Debug, Deserialize)]
struct StreamQuery {
    session: Option<String>,
}

async fn telemetry_ws(
    State(s): State<AppState>,
    Query(q): Query<StreamQuery>,
    ws: WebSocketUpgrade,
) -> ApiResult<Response> {
    let h = match q.session {
        Some(id) => s.handle(&id)?,
        None => s
            .sessions
            .lock()
            .expect("sessions lock")
            .active()
            .ok_or_else(|| ApiError::from(SessionError::SessionNotRunning))?,
    };
    Ok(ws.on_upgrade(move |socket| pump(socket, h)))
}

fn json_text<T: Serialize>(v: &T) -> WsMessage {
    WsMessage::Text(serde_json::to_string(v).expect("serializable"))
}

/// Server pushes every downlinked message; client frames are operator
/// commands, each answered with a receipt or an error body.
async fn pump(socket: WebSocket, h: Arc<SessionHandle>) {
    let (mut tx, mut rx) = socket.split();
    let mut stream = h.subscribe();
    loop {
        tokio::select! {
            item = stream.recv() => match item {
                Ok(item) => {
                    if tx.send(json_text(&item)).await.is_err() {
                        break;
                    }
                }
                Err(RecvError::Lagged(n)) => log::warn!("telemetry client lagged by {n} messages"),
                Err(RecvError::Closed) => break,
            },
            incoming = rx.next() => {
                let text = match incoming {
                    Some(Ok(WsMessage::Text(t))) => t,
                    Some(Ok(WsMessage::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                let reply = match parse_command(text.as_bytes()) {
                    Ok(cmd) => h.command(cmd).await,
                    Err(e) => Err(e),
                };
                let out = match reply {
                    Ok(receipt) => json_text(&receipt),
                    Err(e) => {
                        let ApiError { kind, message, .. } = e.into();
                        json_text(&ErrorBody { error: kind, message })
                    }
                };
                if tx.send(out).await.is_err() {
                    break;
                }
            }
        }
    }
    let _ = tx.close().await;
}
