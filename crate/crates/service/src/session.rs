//! Live negotiation with human workers through the operator console.
//!
//! The allocation nodes talk to a [`LiveGateway`], which never blocks: it
//! records each offer and completion query in a [`LiveSession`] and reports
//! whatever the console has answered so far. HTTP handlers answer through
//! the same session.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};
use teamalloc::nodes::{CompletionQuery, NegotiationGateway, NegotiationRequest, RequestId, Response};
use teamalloc::sim::SimGateway;
use tokio::sync::broadcast;

use crate::document::Instruction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    /// Accept-or-reject offer of an action.
    Offer,
    /// Confirmation that an accepted action is done.
    Completion,
}

impl RequestKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RequestKind::Offer => "offer",
            RequestKind::Completion => "completion",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestState {
    Pending,
    Accepted,
    Rejected,
    Completed,
    /// Withdrawn by the allocator.
    Cancelled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Reject,
}

/// What the console shows for one request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsoleRequest {
    pub request: u64,
    pub run: String,
    pub worker: String,
    pub kind: RequestKind,
    pub state: RequestState,
    pub action: String,
    pub label: String,
    pub collaborative: bool,
    pub partners: Vec<String>,
    pub expected_duration: f64,
    /// Start of execution, for completion queries.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub started: Option<f64>,
    /// Run time the request was issued.
    pub sent_at: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instruction: Option<Instruction>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Ack {
    pub request: u64,
    pub state: RequestState,
    /// The same answer had already been recorded.
    pub duplicate: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SessionError {
    #[error("worker `{worker}` has no request {request}")]
    UnknownRequest { worker: String, request: u64 },
    #[error("request {request} is a{} {} request", if *.kind == RequestKind::Offer { "n" } else { "" }, .kind.as_str())]
    WrongKind { request: u64, kind: RequestKind },
    #[error("request {request} was already answered with {state:?}")]
    ConflictingDecision { request: u64, state: RequestState },
    #[error("request {request} has not been accepted")]
    NotAccepted { request: u64 },
    #[error("request {request} is no longer open ({state:?})")]
    StaleRequest { request: u64, state: RequestState },
}

impl SessionError {
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::UnknownRequest { .. } => "unknown_request",
            SessionError::WrongKind { .. } => "wrong_kind",
            SessionError::ConflictingDecision { .. } => "conflicting_decision",
            SessionError::NotAccepted { .. } => "not_accepted",
            SessionError::StaleRequest { .. } => "stale_request",
        }
    }
}

#[derive(Default)]
struct State {
    next: u64,
    requests: BTreeMap<u64, ConsoleRequest>,
    /// `(worker, action)` pairs finished from the console before the
    /// allocator asked.
    early: BTreeSet<(String, String)>,
    /// Requests already reported as overdue.
    overdue: BTreeSet<u64>,
    alerts: Vec<String>,
}

/// Requests for the console-driven humans of one run.
#[derive(Clone)]
pub struct LiveSession {
    run: String,
    instructions: Arc<HashMap<String, Instruction>>,
    /// Run seconds after which an unanswered request raises an alert.
    soft_timeout: Option<f64>,
    state: Arc<Mutex<State>>,
    notices: broadcast::Sender<ConsoleRequest>,
}

impl LiveSession {
    pub fn new(run: &str, instructions: HashMap<String, Instruction>, soft_timeout: Option<f64>) -> Self {
        LiveSession {
            run: run.to_string(),
            instructions: Arc::new(instructions),
            soft_timeout,
            state: Arc::new(Mutex::new(State {
                next: 1,
                ..State::default()
            })),
            notices: broadcast::channel(256).0,
        }
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Every new request and every state change.
    pub fn subscribe(&self) -> broadcast::Receiver<ConsoleRequest> {
        self.notices.subscribe()
    }

    pub fn pending(&self, worker: &str) -> Vec<ConsoleRequest> {
        self.lock()
            .requests
            .values()
            .filter(|r| r.worker == worker && r.state == RequestState::Pending)
            .cloned()
            .collect()
    }

    pub fn request(&self, id: u64) -> Option<ConsoleRequest> {
        self.lock().requests.get(&id).cloned()
    }

    pub fn requests(&self) -> Vec<ConsoleRequest> {
        self.lock().requests.values().cloned().collect()
    }

    /// Cancels every request still open, once the run is over.
    pub fn cancel_open(&self) {
        let mut state = self.lock();
        let mut changed = Vec::new();
        for r in state.requests.values_mut() {
            if r.state == RequestState::Pending {
                r.state = RequestState::Cancelled;
                changed.push(r.clone());
            }
        }
        drop(state);
        for r in changed {
            let _ = self.notices.send(r);
        }
    }

    /// The worker's most recently answered request.
    pub fn last_answered(&self, worker: &str) -> Option<ConsoleRequest> {
        self.lock()
            .requests
            .values()
            .rev()
            .find(|r| r.worker == worker && r.state != RequestState::Pending)
            .cloned()
    }

    /// Alerts raised since the last call.
    pub fn take_alerts(&self) -> Vec<String> {
        std::mem::take(&mut self.lock().alerts)
    }

    fn owned<'a>(state: &'a mut State, worker: &str, id: u64) -> Result<&'a mut ConsoleRequest, SessionError> {
        state
            .requests
            .get_mut(&id)
            .filter(|r| r.worker == worker)
            .ok_or_else(|| SessionError::UnknownRequest {
                worker: worker.to_string(),
                request: id,
            })
    }

    pub fn decide(&self, worker: &str, id: u64, decision: Decision) -> Result<Ack, SessionError> {
        let mut state = self.lock();
        let request = Self::owned(&mut state, worker, id)?;
        if request.kind != RequestKind::Offer {
            return Err(SessionError::WrongKind { request: id, kind: request.kind });
        }
        let wanted = match decision {
            Decision::Accept => RequestState::Accepted,
            Decision::Reject => RequestState::Rejected,
        };
        match request.state {
            RequestState::Pending => {
                request.state = wanted;
                let notice = request.clone();
                drop(state);
                let _ = self.notices.send(notice);
                Ok(Ack { request: id, state: wanted, duplicate: false })
            }
            s if s == wanted => Ok(Ack { request: id, state: s, duplicate: true }),
            RequestState::Cancelled => Err(SessionError::StaleRequest { request: id, state: RequestState::Cancelled }),
            s => Err(SessionError::ConflictingDecision { request: id, state: s }),
        }
    }

    /// Marks an action done. `id` is the completion query or, before the
    /// allocator has asked, the accepted offer.
    pub fn complete(&self, worker: &str, id: u64) -> Result<Ack, SessionError> {
        let mut state = self.lock();
        let request = Self::owned(&mut state, worker, id)?;
        match (request.kind, request.state) {
            (RequestKind::Completion, RequestState::Pending) => {
                request.state = RequestState::Completed;
                let notice = request.clone();
                drop(state);
                let _ = self.notices.send(notice);
                Ok(Ack { request: id, state: RequestState::Completed, duplicate: false })
            }
            (RequestKind::Completion, RequestState::Completed) => Ok(Ack {
                request: id,
                state: RequestState::Completed,
                duplicate: true,
            }),
            (RequestKind::Completion, s) => Err(SessionError::StaleRequest { request: id, state: s }),
            (RequestKind::Offer, RequestState::Accepted) => {
                let key = (request.worker.clone(), request.action.clone());
                let action = request.action.clone();
                let query = state
                    .requests
                    .values()
                    .find(|r| r.kind == RequestKind::Completion && r.worker == worker && r.action == action)
                    .map(|r| (r.request, r.state));
                match query {
                    Some((q, RequestState::Pending)) => {
                        drop(state);
                        self.complete(worker, q).map(|a| Ack { request: id, ..a })
                    }
                    Some((_, RequestState::Completed)) => Ok(Ack {
                        request: id,
                        state: RequestState::Completed,
                        duplicate: true,
                    }),
                    Some((_, s)) => Err(SessionError::StaleRequest { request: id, state: s }),
                    None => {
                        let duplicate = !state.early.insert(key);
                        Ok(Ack { request: id, state: RequestState::Completed, duplicate })
                    }
                }
            }
            (RequestKind::Offer, RequestState::Pending) => Err(SessionError::NotAccepted { request: id }),
            (RequestKind::Offer, s) => Err(SessionError::StaleRequest { request: id, state: s }),
        }
    }

    fn issue(&self, mut request: ConsoleRequest, answered_early: bool) -> RequestId {
        let mut state = self.lock();
        let id = state.next;
        state.next += 1;
        request.request = id;
        if answered_early {
            request.state = RequestState::Completed;
        }
        state.requests.insert(id, request.clone());
        drop(state);
        let _ = self.notices.send(request);
        id
    }

    fn blank(&self, worker: &str, action: &str, label: &str, kind: RequestKind, now: f64) -> ConsoleRequest {
        ConsoleRequest {
            request: 0,
            run: self.run.clone(),
            worker: worker.to_string(),
            kind,
            state: RequestState::Pending,
            action: action.to_string(),
            label: label.to_string(),
            collaborative: false,
            partners: Vec::new(),
            expected_duration: 0.0,
            started: None,
            sent_at: now,
            instruction: self.instructions.get(action).cloned(),
        }
    }
}

/// Gateway whose answers come from the console.
pub struct LiveGateway {
    session: LiveSession,
}

impl LiveGateway {
    pub fn new(session: LiveSession) -> Self {
        LiveGateway { session }
    }
}

impl NegotiationGateway for LiveGateway {
    fn send_request(&mut self, request: NegotiationRequest, now: f64) -> RequestId {
        let mut r = self
            .session
            .blank(&request.worker_id, &request.action_id, &request.label, RequestKind::Offer, now);
        r.collaborative = request.collaborative;
        r.partners = request.partners;
        r.expected_duration = request.expected_duration;
        self.session.issue(r, false)
    }

    fn send_completion_query(&mut self, query: CompletionQuery, now: f64) -> RequestId {
        let early = self
            .session
            .lock()
            .early
            .remove(&(query.worker_id.clone(), query.action_id.clone()));
        let mut r = self
            .session
            .blank(&query.worker_id, &query.action_id, &query.label, RequestKind::Completion, now);
        r.expected_duration = query.expected_duration;
        r.started = Some(query.started);
        self.session.issue(r, early)
    }

    fn poll_response(&mut self, id: RequestId, now: f64) -> Response {
        let mut state = self.session.lock();
        let Some(request) = state.requests.get(&id) else {
            return Response::Unknown;
        };
        match request.state {
            RequestState::Pending => {
                let due = match request.kind {
                    RequestKind::Offer => request.sent_at,
                    RequestKind::Completion => request.started.unwrap_or(request.sent_at) + request.expected_duration,
                };
                if let Some(limit) = self.session.soft_timeout {
                    if now - due > limit && state.overdue.insert(id) {
                        let r = &state.requests[&id];
                        let message = format!(
                            "{} has not answered {} request {id} for {} after {:.0} s",
                            r.worker,
                            r.kind.as_str(),
                            r.action,
                            now - due
                        );
                        state.alerts.push(message);
                    }
                }
                Response::Pending
            }
            RequestState::Accepted => Response::Accepted,
            RequestState::Rejected => Response::Rejected,
            RequestState::Completed => Response::Completed,
            RequestState::Cancelled => Response::Unknown,
        }
    }

    fn cancel(&mut self, id: RequestId) {
        let mut state = self.session.lock();
        if let Some(r) = state.requests.get_mut(&id) {
            if r.state == RequestState::Pending {
                r.state = RequestState::Cancelled;
                let notice = r.clone();
                drop(state);
                let _ = self.session.notices.send(notice);
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Route {
    Live(RequestId),
    Sim(RequestId),
}

/// Sends console workers' requests to the live session and everyone
/// else's to simulated humans.
pub struct RoutedGateway {
    live: LiveGateway,
    sim: SimGateway,
    console: BTreeSet<String>,
    next: RequestId,
    routes: HashMap<RequestId, Route>,
}

impl RoutedGateway {
    pub fn new(live: LiveGateway, sim: SimGateway, console: impl IntoIterator<Item = String>) -> Self {
        RoutedGateway {
            live,
            sim,
            console: console.into_iter().collect(),
            next: 1,
            routes: HashMap::new(),
        }
    }

    fn route(&mut self, route: Route) -> RequestId {
        let id = self.next;
        self.next += 1;
        self.routes.insert(id, route);
        id
    }
}

impl NegotiationGateway for RoutedGateway {
    fn send_request(&mut self, request: NegotiationRequest, now: f64) -> RequestId {
        let route = if self.console.contains(&request.worker_id) {
            Route::Live(self.live.send_request(request, now))
        } else {
            Route::Sim(self.sim.send_request(request, now))
        };
        self.route(route)
    }

    fn send_completion_query(&mut self, query: CompletionQuery, now: f64) -> RequestId {
        let route = if self.console.contains(&query.worker_id) {
            Route::Live(self.live.send_completion_query(query, now))
        } else {
            Route::Sim(self.sim.send_completion_query(query, now))
        };
        self.route(route)
    }

    fn poll_response(&mut self, id: RequestId, now: f64) -> Response {
        match self.routes.get(&id) {
            Some(&Route::Live(inner)) => self.live.poll_response(inner, now),
            Some(&Route::Sim(inner)) => self.sim.poll_response(inner, now),
            None => Response::Unknown,
        }
    }

    fn cancel(&mut self, id: RequestId) {
        match self.routes.remove(&id) {
            Some(Route::Live(inner)) => self.live.cancel(inner),
            Some(Route::Sim(inner)) => self.sim.cancel(inner),
            None => {}
        }
    }
}
