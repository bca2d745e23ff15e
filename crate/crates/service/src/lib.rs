//! HTTP and WebSocket front end for swarm command sessions.
//!
//! Each session owns a world and runs its own stepping loop. Commands are
//! serialized per session and the blocking pipeline stages run on the
//! blocking pool. Stream subscribers share one coalesced event sequence.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use axum::extract::rejection::JsonRejection;
use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use swarmcommand_core::nl_pipeline::{
    AuditLog, CommandInput, ExecutionStatus, Pipeline, PipelineTrace, Session, Stage, StopAck,
};
use swarmcommand_core::swarm_sim::{load_scenario, WorldSnapshot, DEFAULT_SEED};
use tokio::sync::{broadcast, Notify};

pub const MAX_SNAPSHOTS_PER_SECOND: f64 = 30.0;
pub const DEFAULT_STEPS_PER_SECOND: f64 = 60.0;
const EVENT_BUFFER: usize = 4096;

#[derive(Clone, Debug)]
pub struct ServiceOptions {
    /// Simulation steps per second while a tree runs.
    pub steps_per_second: f64,
    /// Upper bound on snapshot events per second.
    pub snapshots_per_second: f64,
    /// One `<session>.jsonl` audit log per session when set.
    pub audit_dir: Option<PathBuf>,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        ServiceOptions {
            steps_per_second: DEFAULT_STEPS_PER_SECOND,
            snapshots_per_second: MAX_SNAPSHOTS_PER_SECOND,
            audit_dir: None,
        }
    }
}

/// One message on a session stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StreamEvent {
    Snapshot(WorldSnapshot),
    TraceStage {
        trace_id: String,
        stage: Stage,
        payload: Value,
    },
}

impl StreamEvent {
    pub fn stage(stage: Stage, trace: &PipelineTrace) -> Self {
        let payload = match stage {
            Stage::Normalize => json!({ "normalized_text": trace.normalized_text, "errors": trace.errors }),
            Stage::Safety => json!({ "safety_verdict": trace.safety_verdict, "errors": trace.errors }),
            Stage::Prompt => json!({ "prompt": trace.prompt, "errors": trace.errors }),
            Stage::Generate => json!({ "raw_model_output": trace.raw_model_output, "errors": trace.errors }),
            Stage::Validate => json!({ "validation_report": trace.validation_report }),
            Stage::Execute => json!({
                "execution_status": trace.execution_status,
                "ticks": trace.ticks,
                "errors": trace.errors,
            }),
        };
        StreamEvent::TraceStage {
            trace_id: trace.trace_id.clone(),
            stage,
            payload,
        }
    }

    fn encode(&self) -> Arc<str> {
        serde_json::to_string(self).expect("events serialize").into()
    }
}

struct Inner {
    session: Session,
    /// The world changed since the last published snapshot.
    dirty: bool,
}

struct SessionHandle {
    id: String,
    scenario_id: u8,
    seed: u64,
    created_at: Instant,
    inner: Mutex<Inner>,
    commands: tokio::sync::Mutex<()>,
    events: broadcast::Sender<Arc<str>>,
    teardown: Notify,
}

impl SessionHandle {
    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn publish(&self, event: &StreamEvent) {
        // No subscribers is fine.
        let _ = self.events.send(event.encode());
    }
}

/// Shared service state.
#[derive(Clone)]
pub struct AppState {
    pipeline: Arc<Pipeline>,
    options: Arc<ServiceOptions>,
    sessions: Arc<Mutex<HashMap<String, Arc<SessionHandle>>>>,
    next_id: Arc<AtomicU64>,
}

impl AppState {
    pub fn new(pipeline: Pipeline, options: ServiceOptions) -> Self {
        AppState {
            pipeline: Arc::new(pipeline),
            options: Arc::new(options),
            sessions: Arc::new(Mutex::new(HashMap::new())),
            next_id: Arc::new(AtomicU64::new(1)),
        }
    }

    fn sessions(&self) -> MutexGuard<'_, HashMap<String, Arc<SessionHandle>>> {
        self.sessions.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn session(&self, id: &str) -> Result<Arc<SessionHandle>, ApiError> {
        self.sessions()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("no session `{id}`")))
    }
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    Unprocessable(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, message) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::Unprocessable(m) => (StatusCode::UNPROCESSABLE_ENTITY, m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(json!({ "error": message }))).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::Unprocessable(r.body_text())
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", axum::routing::delete(delete_session))
        .route("/sessions/{id}/command", post(command))
        .route("/sessions/{id}/stop", post(stop))
        .route("/sessions/{id}/trace", get(traces))
        .route("/sessions/{id}/state", get(world_state))
        .route("/sessions/{id}/stream", get(stream))
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

async fn health(State(app): State<AppState>) -> Json<Value> {
    Json(json!({ "status": "ok", "sessions": app.sessions().len() }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub scenario_id: u8,
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub scenario_id: u8,
    pub seed: u64,
}

async fn create_session(
    State(app): State<AppState>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let Json(req) = body?;
    let scenario = load_scenario(req.scenario_id).map_err(|e| ApiError::Unprocessable(e.to_string()))?;
    let seed = req.seed.unwrap_or(DEFAULT_SEED);
    let world = scenario.world(seed).map_err(|e| ApiError::Internal(e.to_string()))?;
    let id = format!("session-{}", app.next_id.fetch_add(1, Ordering::Relaxed));
    let cfg = app.pipeline.config();
    let mut session = Session::new(&id, world, cfg.command_mode, cfg.max_ticks);
    if let Some(dir) = &app.options.audit_dir {
        let log = AuditLog::open(dir.join(format!("{id}.jsonl"))).map_err(|e| ApiError::Internal(e.to_string()))?;
        session = session.with_audit(log);
    }
    let (events, _) = broadcast::channel(EVENT_BUFFER);
    let handle = Arc::new(SessionHandle {
        id: id.clone(),
        scenario_id: req.scenario_id,
        seed,
        created_at: Instant::now(),
        inner: Mutex::new(Inner { session, dirty: false }),
        commands: tokio::sync::Mutex::new(()),
        events,
        teardown: Notify::new(),
    });
    app.sessions().insert(id.clone(), handle.clone());
    tokio::spawn(session_loop(handle, app.options.clone()));
    tracing::info!(session = %id, scenario = req.scenario_id, seed, "session created");
    Ok((
        StatusCode::CREATED,
        Json(SessionCreated {
            session_id: id,
            scenario_id: req.scenario_id,
            seed,
        }),
    ))
}

async fn delete_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    let handle = app
        .sessions()
        .remove(&id)
        .ok_or_else(|| ApiError::NotFound(format!("no session `{id}`")))?;
    handle.teardown.notify_one();
    tracing::info!(session = %id, age_s = handle.created_at.elapsed().as_secs_f64(), "session removed");
    Ok(StatusCode::NO_CONTENT)
}

/// Steps the world at a fixed rate and publishes snapshots no faster than
/// the configured bound. Ends on teardown.
async fn session_loop(handle: Arc<SessionHandle>, options: Arc<ServiceOptions>) {
    let mut ticker = tokio::time::interval(Duration::from_secs_f64(1.0 / options.steps_per_second.max(1e-3)));
    ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
    let min_gap = Duration::from_secs_f64(1.0 / options.snapshots_per_second.max(1e-3));
    let mut last_published: Option<Instant> = None;
    loop {
        tokio::select! {
            _ = ticker.tick() => {}
            _ = handle.teardown.notified() => break,
        }
        let mut out = Vec::new();
        {
            let mut inner = handle.lock();
            if let Some(step) = inner.session.step() {
                inner.dirty = true;
                if let Some(done) = &step.finished {
                    out.push(StreamEvent::stage(Stage::Execute, done));
                }
                if let Some(started) = step.started.as_deref().and_then(|t| inner.session.trace(t)) {
                    out.push(StreamEvent::stage(Stage::Execute, &started));
                }
            }
            let due = last_published.is_none_or(|t| t.elapsed() >= min_gap);
            if inner.dirty && due {
                inner.dirty = false;
                last_published = Some(Instant::now());
                out.push(StreamEvent::Snapshot(inner.session.world().snapshot()));
            }
        }
        for event in &out {
            handle.publish(event);
        }
    }
    tracing::debug!(session = %handle.id, "session loop ended");
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandBody {
    pub text: String,
    pub language: Option<String>,
    pub shots: Option<u8>,
}

async fn command(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<CommandBody>, JsonRejection>,
) -> Result<Response, ApiError> {
    let handle = app.session(&id)?;
    let Json(req) = body?;
    if req.text.trim().is_empty() {
        return Err(ApiError::Unprocessable("`text` must not be empty".into()));
    }
    let mut input = CommandInput::text(&id, req.text);
    if let Some(lang) = req.language {
        input = input.with_language(lang);
    }

    let _serial = handle.commands.lock().await;
    let pipeline = app.pipeline.clone();
    let h = handle.clone();
    let prepared = tokio::task::spawn_blocking(move || {
        pipeline.prepare_with(input, req.shots, &mut |stage, trace| h.publish(&StreamEvent::stage(stage, trace)))
    })
    .await
    .map_err(|e| ApiError::Internal(format!("pipeline task failed: {e}")))?;

    let trace = handle.lock().session.install(prepared);
    handle.publish(&StreamEvent::stage(Stage::Execute, &trace));
    let status = if trace.endpoint_unavailable() {
        StatusCode::SERVICE_UNAVAILABLE
    } else {
        StatusCode::OK
    };
    Ok((status, Json(trace)).into_response())
}

async fn stop(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<StopAck>, ApiError> {
    let handle = app.session(&id)?;
    let (ack, stopped) = {
        let mut inner = handle.lock();
        let ack = inner.session.stop();
        if ack.was_running {
            inner.dirty = true;
        }
        let stopped = ack.stopped_trace.as_deref().and_then(|t| inner.session.trace(t));
        (ack, stopped)
    };
    if let Some(t) = stopped.filter(|t| t.execution_status == ExecutionStatus::Stopped) {
        handle.publish(&StreamEvent::stage(Stage::Execute, &t));
    }
    Ok(Json(ack))
}

async fn traces(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<Vec<PipelineTrace>>, ApiError> {
    let handle = app.session(&id)?;
    let traces = handle.lock().session.traces();
    Ok(Json(traces))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub scenario_id: u8,
    pub seed: u64,
    pub running: bool,
    pub snapshot: WorldSnapshot,
}

async fn world_state(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionState>, ApiError> {
    let handle = app.session(&id)?;
    let inner = handle.lock();
    Ok(Json(SessionState {
        session_id: handle.id.clone(),
        scenario_id: handle.scenario_id,
        seed: handle.seed,
        running: inner.session.is_running(),
        snapshot: inner.session.world().snapshot(),
    }))
}

async fn stream(
    State(app): State<AppState>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let handle = app.session(&id)?;
    // Subscribe before taking the opening snapshot so nothing is missed.
    let rx = handle.events.subscribe();
    let opening = handle.lock().session.world().snapshot();
    drop(handle);
    Ok(ws.on_upgrade(move |socket| forward(socket, rx, opening)))
}

/// Sends the opening snapshot, then every session event. Snapshots whose
/// tick is not above the last one sent are dropped. The socket closes when
/// the session goes away or the client disconnects.
async fn forward(mut socket: WebSocket, mut rx: broadcast::Receiver<Arc<str>>, opening: WorldSnapshot) {
    let mut last_tick = opening.tick;
    let first = StreamEvent::Snapshot(opening).encode();
    if socket.send(WsMessage::Text(first.as_ref().into())).await.is_err() {
        return;
    }
    loop {
        tokio::select! {
            msg = rx.recv() => match msg {
                Ok(text) => {
                    if let Some(tick) = snapshot_tick(&text) {
                        if tick <= last_tick {
                            continue;
                        }
                        last_tick = tick;
                    }
                    if socket.send(WsMessage::Text(text.as_ref().into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    tracing::warn!(skipped = n, "stream subscriber lagged");
                }
                Err(broadcast::error::RecvError::Closed) => break,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(WsMessage::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
    let _ = socket.send(WsMessage::Close(None)).await;
}

fn snapshot_tick(text: &str) -> Option<u64> {
    if !text.starts_with(r#"{"type":"snapshot""#) {
        return None;
    }
    serde_json::from_str::<Value>(text).ok()?.get("tick")?.as_u64()
}
