//! HTTP interface used by the operator console.
//!
//! Errors are `{"error": {"code", "message"}}` with an HTTP status that
//! matches the code. Worker endpoints take an optional `run`; without it
//! they act on the most recent run that includes the worker.

use std::convert::Infallible;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use teamalloc::cost::Vec3;
use teamalloc::nodes::{RunConfig, Variant};
use tokio::sync::broadcast;

use crate::document::{load_job, Diagnostic, LoadedJob};
use crate::manager::{HandleError, Pacing, RunHandle, RunManager, RunMode, RunOptions, SimulatedHumans};
use crate::session::{ConsoleRequest, Decision, LiveSession, RequestState, SessionError};

/// Shared server state.
#[derive(Clone)]
pub struct AppState {
    pub manager: Arc<RunManager>,
    /// Job used when `POST /runs` carries none.
    pub default_job: Option<Arc<LoadedJob>>,
    /// Defaults for runs started over HTTP.
    pub defaults: RunOptions,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/runs", get(list_runs).post(start_run))
        .route("/runs/{id}/state", get(run_state))
        .route("/runs/{id}/log", get(run_log))
        .route("/runs/{id}/stream", get(run_stream))
        .route("/runs/{id}/stop", post(stop_run))
        .route("/workers/{id}/pending", get(worker_pending))
        .route("/workers/{id}/decision", post(worker_decision))
        .route("/workers/{id}/completion", post(worker_completion))
        .route("/workers/{id}/position", post(worker_position))
        .route("/workers/{id}/stream", get(worker_stream))
        .with_state(state)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    diagnostics: Vec<Diagnostic>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            diagnostics: Vec::new(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut error = json!({ "code": self.code, "message": self.message });
        if !self.diagnostics.is_empty() {
            error["diagnostics"] = json!(self.diagnostics);
        }
        (self.status, Json(json!({ "error": error }))).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match e {
            SessionError::UnknownRequest { .. } => StatusCode::NOT_FOUND,
            SessionError::StaleRequest { .. } => StatusCode::GONE,
            _ => StatusCode::CONFLICT,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<HandleError> for ApiError {
    fn from(e: HandleError) -> Self {
        match e {
            HandleError::UnknownWorker(_) => ApiError::new(StatusCode::NOT_FOUND, "unknown_worker", e.to_string()),
            HandleError::Ended => ApiError::new(StatusCode::CONFLICT, "run_ended", e.to_string()),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    let text = if body.is_empty() { b"{}".as_slice() } else { body };
    serde_json::from_slice(text).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_body", e.to_string()))
}

fn find_run(state: &AppState, id: &str) -> ApiResult<Arc<RunHandle>> {
    state
        .manager
        .get(id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_run", format!("no run `{id}`")))
}

fn worker_run(state: &AppState, worker: &str, run: Option<&str>) -> ApiResult<Arc<RunHandle>> {
    let handle = match run {
        Some(id) => find_run(state, id)?,
        None => state
            .manager
            .latest_for_worker(worker)
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_worker", format!("no run has worker `{worker}`")))?,
    };
    if !handle.has_worker(worker) {
        return Err(HandleError::UnknownWorker(worker.to_string()).into());
    }
    Ok(handle)
}

fn console_session(handle: &RunHandle, worker: &str) -> ApiResult<LiveSession> {
    match handle.session() {
        Some(s) if handle.is_console(worker) => Ok(s.clone()),
        _ => Err(ApiError::new(
            StatusCode::CONFLICT,
            "not_console",
            format!("worker `{worker}` is simulated in {}", handle.id),
        )),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct StartRun {
    /// Inline job document; the server's job when absent.
    job: Option<serde_json::Value>,
    mode: Option<RunMode>,
    variant: Option<Variant>,
    config: Option<RunConfig>,
    humans: Option<SimulatedHumans>,
    time_scale: Option<f64>,
    soft_timeout: Option<f64>,
}

async fn start_run(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let request: StartRun = parse_body(&body)?;
    let job = match request.job {
        Some(value) => {
            let text = serde_json::to_string_pretty(&value).expect("values serialize");
            Arc::new(load_job(&text).map_err(|e| ApiError {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                code: "invalid_job",
                message: e.to_string(),
                diagnostics: e.0,
            })?)
        }
        None => state
            .default_job
            .clone()
            .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "no_job", "request has no job and the server has no default"))?,
    };
    let mut options = state.defaults.clone();
    if let Some(mode) = request.mode {
        options.mode = mode;
    }
    if let Some(humans) = request.humans {
        options.humans = humans;
    }
    if let Some(scale) = request.time_scale {
        if !(scale > 0.0) {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, "invalid_body", "time_scale must be positive"));
        }
        options.pacing = Some(Pacing::RealTime { scale });
    }
    if request.soft_timeout.is_some() {
        options.soft_timeout = request.soft_timeout;
    }
    let mut config = request.config.or(options.config).unwrap_or(job.config());
    if let Some(variant) = request.variant {
        config.variant = variant;
    }
    options.config = Some(config);
    let handle = state.manager.start(&job, &options).map_err(|e| {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_job", e.to_string())
    })?;
    Ok((StatusCode::CREATED, Json(handle.summary())).into_response())
}

async fn list_runs(State(state): State<AppState>) -> impl IntoResponse {
    Json(json!({ "runs": state.manager.list() }))
}

async fn run_state(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(find_run(&state, &id)?.snapshot()))
}

async fn run_log(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let log = find_run(&state, &id)?.log_text();
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], log))
}

async fn stop_run(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let handle = find_run(&state, &id)?;
    handle.stop();
    Ok((StatusCode::ACCEPTED, Json(handle.summary())))
}

/// Backlog, then items from a broadcast channel until it closes or `last`
/// says to stop.
fn follow<T: Clone + Send + 'static>(
    backlog: Vec<T>,
    rx: broadcast::Receiver<T>,
    keep: impl Fn(&T) -> bool + Send + Sync + 'static,
    last: impl Fn(&T) -> bool + Send + Sync + 'static,
) -> impl Stream<Item = T> + Send {
    let done = backlog.iter().any(&last);
    let filters = Arc::new((keep, last));
    let live = stream::unfold((rx, done), move |(mut rx, done)| {
        let filters = filters.clone();
        async move {
            if done {
                return None;
            }
            loop {
                match rx.recv().await {
                    Ok(item) if (filters.0)(&item) => {
                        let done = (filters.1)(&item);
                        return Some((item, (rx, done)));
                    }
                    Ok(_) | Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(broadcast::error::RecvError::Closed) => return None,
                }
            }
        }
    });
    stream::iter(backlog).chain(live)
}

fn log_event(line: String) -> Result<Event, Infallible> {
    let mut parts = line.splitn(4, ',');
    let seq = parts.next().unwrap_or_default().to_string();
    let _time = parts.next();
    let kind = parts.next().unwrap_or_default().to_string();
    Ok(Event::default().id(seq).event(kind).data(line))
}

async fn run_stream(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let handle = find_run(&state, &id)?;
    let (backlog, rx) = handle.follow_log();
    let lines = follow(backlog, rx, |_| true, |line: &String| line.contains(",run_finished,"));
    Ok(Sse::new(lines.map(log_event)).keep_alive(KeepAlive::default()))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunQuery {
    run: Option<String>,
}

#[derive(Serialize)]
struct PendingReply {
    run: String,
    worker: String,
    requests: Vec<ConsoleRequest>,
    /// Most recently answered request.
    #[serde(skip_serializing_if = "Option::is_none")]
    last: Option<ConsoleRequest>,
}

async fn worker_pending(
    State(state): State<AppState>,
    Path(worker): Path<String>,
    Query(query): Query<RunQuery>,
) -> ApiResult<impl IntoResponse> {
    let handle = worker_run(&state, &worker, query.run.as_deref())?;
    let (requests, last) = match handle.session() {
        Some(session) if handle.is_console(&worker) => (session.pending(&worker), session.last_answered(&worker)),
        _ => (Vec::new(), None),
    };
    Ok(Json(PendingReply {
        run: handle.id.clone(),
        worker,
        requests,
        last,
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DecisionBody {
    request: u64,
    decision: Decision,
    #[serde(default)]
    run: Option<String>,
}

async fn worker_decision(
    State(state): State<AppState>,
    Path(worker): Path<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let body: DecisionBody = parse_body(&body)?;
    let handle = worker_run(&state, &worker, body.run.as_deref())?;
    let ack = console_session(&handle, &worker)?.decide(&worker, body.request, body.decision)?;
    Ok(Json(ack))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompletionBody {
    request: u64,
    #[serde(default)]
    run: Option<String>,
}

async fn worker_completion(
    State(state): State<AppState>,
    Path(worker): Path<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let body: CompletionBody = parse_body(&body)?;
    let handle = worker_run(&state, &worker, body.run.as_deref())?;
    let ack = console_session(&handle, &worker)?.complete(&worker, body.request)?;
    Ok(Json(ack))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PositionBody {
    position: Vec3,
    #[serde(default)]
    run: Option<String>,
}

async fn worker_position(
    State(state): State<AppState>,
    Path(worker): Path<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let body: PositionBody = parse_body(&body)?;
    if body.position.iter().any(|c| !c.is_finite()) {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "invalid_body", "position must be finite"));
    }
    let handle = worker_run(&state, &worker, body.run.as_deref())?;
    handle.set_position(&worker, body.position)?;
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({ "run": handle.id, "worker": worker, "position": body.position })),
    ))
}

async fn worker_stream(
    State(state): State<AppState>,
    Path(worker): Path<String>,
    Query(query): Query<RunQuery>,
) -> ApiResult<impl IntoResponse> {
    let handle = worker_run(&state, &worker, query.run.as_deref())?;
    let session = console_session(&handle, &worker)?;
    let rx = session.subscribe();
    let backlog = session.pending(&worker);
    let who = worker.clone();
    let requests = follow(backlog, rx, move |r: &ConsoleRequest| r.worker == who, |_| false);
    let events = requests.map(|r| {
        let name = match r.state {
            RequestState::Pending => "request",
            _ => "update",
        };
        Ok::<_, Infallible>(Event::default().id(r.request.to_string()).event(name).data(serde_json::to_string(&r).expect("requests serialize")))
    });
    Ok(Sse::new(events).keep_alive(KeepAlive::default()))
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}
