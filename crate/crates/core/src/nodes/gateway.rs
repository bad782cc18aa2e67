use serde::{Deserialize, Serialize};

pub type RequestId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Response {
    Pending,
    Accepted,
    Rejected,
    Completed,
    /// The id is not known to the gateway.
    Unknown,
}

/// Action offer sent to one human worker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegotiationRequest {
    pub worker: usize,
    pub worker_id: String,
    pub action: usize,
    pub action_id: String,
    pub label: String,
    pub collaborative: bool,
    /// Other members of the candidate, if collaborative.
    pub partners: Vec<String>,
    pub expected_duration: f64,
}

/// Ask a human worker to confirm that an accepted action is done.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionQuery {
    pub worker: usize,
    pub worker_id: String,
    pub action: usize,
    pub action_id: String,
    pub label: String,
    pub started: f64,
    pub expected_duration: f64,
}

/// Channel between the allocation nodes and human workers.
///
/// Implementations must never block: `poll_response` returns
/// [`Response::Pending`] until the worker has answered.
pub trait NegotiationGateway: Send {
    fn send_request(&mut self, request: NegotiationRequest, now: f64) -> RequestId;
    fn send_completion_query(&mut self, query: CompletionQuery, now: f64) -> RequestId;
    fn poll_response(&mut self, id: RequestId, now: f64) -> Response;
    /// Withdraws a request that is no longer needed.
    fn cancel(&mut self, _id: RequestId) {}
}
