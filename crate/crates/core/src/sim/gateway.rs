use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nodes::{CompletionQuery, NegotiationGateway, NegotiationRequest, RequestId, Response};

/// How a simulated human answers action offers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Policy {
    #[default]
    AlwaysAccept,
    /// Rejects the first `times` offers of each listed action.
    Scripted { rejections: BTreeMap<String, u32> },
    /// Rejects each offer independently with probability `reject`.
    Probabilistic { reject: f64 },
}

impl Policy {
    pub fn reject_once(actions: &[&str]) -> Self {
        Policy::Scripted {
            rejections: actions.iter().map(|a| (a.to_string(), 1)).collect(),
        }
    }
}

#[derive(Debug, Clone)]
enum Pending {
    Offer { answer: Response, at: f64 },
    Completion { at: f64 },
}

/// Simulated humans: answer offers per policy after a fixed delay and
/// confirm completion once the nominal duration has elapsed.
pub struct SimGateway {
    policies: HashMap<String, Policy>,
    /// Offers seen so far per `(worker, action)`.
    offers: HashMap<(String, String), u32>,
    delay: f64,
    rng: ChaCha8Rng,
    next: RequestId,
    pending: BTreeMap<RequestId, Pending>,
}

const TIME_TOL: f64 = 1e-9;

impl SimGateway {
    pub fn new(seed: u64) -> Self {
        SimGateway {
            policies: HashMap::new(),
            offers: HashMap::new(),
            delay: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            next: 1,
            pending: BTreeMap::new(),
        }
    }

    pub fn with_policy(mut self, worker: &str, policy: Policy) -> Self {
        self.policies.insert(worker.to_string(), policy);
        self
    }

    /// Time between an offer and its answer, seconds.
    pub fn with_delay(mut self, delay: f64) -> Self {
        self.delay = delay;
        self
    }

    fn decide(&mut self, worker: &str, action: &str) -> Response {
        let seen = self
            .offers
            .entry((worker.to_string(), action.to_string()))
            .or_default();
        *seen += 1;
        let reject = match self.policies.get(worker) {
            None | Some(Policy::AlwaysAccept) => false,
            Some(Policy::Scripted { rejections }) => rejections.get(action).is_some_and(|&n| *seen <= n),
            Some(Policy::Probabilistic { reject }) => self.rng.gen_bool(reject.clamp(0.0, 1.0)),
        };
        if reject {
            Response::Rejected
        } else {
            Response::Accepted
        }
    }

    fn issue(&mut self, pending: Pending) -> RequestId {
        let id = self.next;
        self.next += 1;
        self.pending.insert(id, pending);
        id
    }
}

impl NegotiationGateway for SimGateway {
    fn send_request(&mut self, request: NegotiationRequest, now: f64) -> RequestId {
        let answer = self.decide(&request.worker_id, &request.action_id);
        self.issue(Pending::Offer {
            answer,
            at: now + self.delay,
        })
    }

    fn send_completion_query(&mut self, query: CompletionQuery, _now: f64) -> RequestId {
        self.issue(Pending::Completion {
            at: query.started + query.expected_duration,
        })
    }

    fn poll_response(&mut self, id: RequestId, now: f64) -> Response {
        let Some(pending) = self.pending.get(&id) else {
            return Response::Unknown;
        };
        let (answer, at) = match *pending {
            Pending::Offer { answer, at } => (answer, at),
            Pending::Completion { at } => (Response::Completed, at),
        };
        if now + TIME_TOL >= at {
            answer
        } else {
            Response::Pending
        }
    }

    fn cancel(&mut self, id: RequestId) {
        self.pending.remove(&id);
    }
}
