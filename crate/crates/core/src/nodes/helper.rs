use super::gateway::{CompletionQuery, NegotiationRequest, RequestId, Response};
use super::{ActionPhase, RunContext};
use crate::alloc::CandidateId;
use crate::bt::{Action, Condition, Inverter, Node, NodeStatus, TickError};
use crate::cost::Outcome;
use crate::nodes::events::EventKind;
use crate::nodes::robot::RobotAction;
use crate::plan::{Job, WorkerKind};

fn allocated(ctx: &RunContext, node: &str, action: usize) -> Result<CandidateId, TickError> {
    ctx.allocation_of(action)?.ok_or_else(|| {
        TickError::fault(node, format!("`{}` has no allocation", ctx.job.action_id(action)))
    })
}

fn humans(ctx: &RunContext, candidate: CandidateId) -> Vec<usize> {
    ctx.members(candidate)
        .iter()
        .copied()
        .filter(|&m| ctx.job.worker_kind(m) == WorkerKind::Human)
        .collect()
}

/// True when the allocated candidate has no human member.
pub struct AgentHandler {
    name: String,
    action: usize,
}

impl AgentHandler {
    pub fn new(action: usize, id: &str) -> Self {
        AgentHandler {
            name: format!("AgentHandler:{id}"),
            action,
        }
    }
}

impl Condition<RunContext> for AgentHandler {
    fn name(&self) -> &str {
        &self.name
    }

    fn evaluate(&mut self, ctx: &mut RunContext) -> Result<bool, TickError> {
        let candidate = allocated(ctx, &self.name, self.action)?;
        Ok(humans(ctx, candidate).is_empty())
    }
}

/// True when the allocated candidate is a combination of workers.
pub struct CollaborativeHandler {
    name: String,
    action: usize,
}

impl CollaborativeHandler {
    pub fn new(action: usize, id: &str) -> Self {
        CollaborativeHandler {
            name: format!("CollaborativeHandler:{id}"),
            action,
        }
    }
}

impl Condition<RunContext> for CollaborativeHandler {
    fn name(&self) -> &str {
        &self.name
    }

    fn evaluate(&mut self, ctx: &mut RunContext) -> Result<bool, TickError> {
        let candidate = allocated(ctx, &self.name, self.action)?;
        Ok(ctx.members(candidate).len() > 1)
    }
}

/// True when the action's last negotiation was rejected.
pub struct ActionRejected {
    name: String,
    action: usize,
}

impl ActionRejected {
    pub fn new(action: usize, id: &str) -> Self {
        ActionRejected {
            name: format!("ActionRejected:{id}"),
            action,
        }
    }
}

impl Condition<RunContext> for ActionRejected {
    fn name(&self) -> &str {
        &self.name
    }

    fn evaluate(&mut self, ctx: &mut RunContext) -> Result<bool, TickError> {
        Ok(ctx.view()?.actions_rejected.contains(&self.action))
    }
}

struct Negotiation {
    candidate: CandidateId,
    /// Outstanding request per human member.
    requests: Vec<(usize, RequestId, bool)>,
}

/// Offers the allocated action to its human members and waits for every one
/// of them to accept. A single rejection rejects the candidate.
pub struct HumanCommunication {
    name: String,
    action: usize,
    state: Option<Negotiation>,
}

impl HumanCommunication {
    pub fn new(action: usize, id: &str) -> Self {
        HumanCommunication {
            name: format!("HumanCommunication:{id}"),
            action,
            state: None,
        }
    }

    fn open(&self, ctx: &mut RunContext) -> Result<Option<Negotiation>, TickError> {
        let a = self.action;
        let candidate = allocated(ctx, &self.name, a)?;
        let humans = humans(ctx, candidate);
        if humans.is_empty() {
            return Ok(None);
        }
        let members = ctx.members(candidate).to_vec();
        let nominal = ctx.job.duration(candidate, a).unwrap_or(0.0);
        for &m in &members {
            ctx.agents[m].engage(a, nominal);
        }
        ctx.phases[a] = ActionPhase::Negotiating;
        let collaborative = members.len() > 1;
        let plan_action = &ctx.job.plan.actions[a];
        let label = if plan_action.label.is_empty() {
            plan_action.id.clone()
        } else {
            plan_action.label.clone()
        };
        let mut requests = Vec::new();
        for &h in &humans {
            let request = NegotiationRequest {
                worker: h,
                worker_id: ctx.job.worker_id(h).to_string(),
                action: a,
                action_id: ctx.job.action_id(a).to_string(),
                label: label.clone(),
                collaborative,
                partners: members
                    .iter()
                    .filter(|&&m| m != h)
                    .map(|&m| ctx.job.worker_id(m).to_string())
                    .collect(),
                expected_duration: nominal,
            };
            let id = ctx.gateway.send_request(request, ctx.now);
            requests.push((h, id, false));
            let event = EventKind::RequestSent {
                request: id,
                worker: ctx.job.worker_id(h).to_string(),
                action: ctx.job.action_id(a).to_string(),
                candidate: ctx.candidate_name(candidate).to_string(),
                collaborative,
            };
            ctx.emit(event);
        }
        Ok(Some(Negotiation { candidate, requests }))
    }

    fn accept(&self, ctx: &mut RunContext, candidate: CandidateId) -> Result<(), TickError> {
        let a = self.action;
        ctx.costs.ledger.record(candidate, a, Outcome::Accepted);
        ctx.view_mut()?.acts_to_be_allocated.remove(&a);
        ctx.phases[a] = ActionPhase::Executing;
        ctx.starts[a] = Some(ctx.now);
        for m in ctx.members(candidate).to_vec() {
            ctx.agents[m].busy_since = Some(ctx.now);
        }
        let event = EventKind::ActionStarted {
            action: ctx.job.action_id(a).to_string(),
            candidate: ctx.candidate_name(candidate).to_string(),
        };
        ctx.emit(event);
        Ok(())
    }

    fn reject(&self, ctx: &mut RunContext, state: &Negotiation, by: (usize, RequestId)) -> Result<(), TickError> {
        let a = self.action;
        let candidate = state.candidate;
        for &(_, id, answered) in &state.requests {
            if !answered && id != by.1 {
                ctx.gateway.cancel(id);
            }
        }
        let counts = ctx.costs.ledger.record(candidate, a, Outcome::Rejected);
        let preference = counts.cost(ctx.costs.psi[candidate.0]);
        let view = ctx.view_mut()?;
        view.actions_rejected.insert(a);
        view.current_allocation.remove(&a);
        for m in ctx.members(candidate).to_vec() {
            ctx.agents[m].release();
        }
        ctx.phases[a] = ActionPhase::Pending;
        let event = EventKind::RequestRejected {
            request: by.1,
            worker: ctx.job.worker_id(by.0).to_string(),
            action: ctx.job.action_id(a).to_string(),
            candidate: ctx.candidate_name(candidate).to_string(),
            negations: counts.negations,
            negotiations: counts.negotiations,
            preference,
        };
        ctx.emit(event);
        Ok(())
    }
}

impl Action<RunContext> for HumanCommunication {
    fn name(&self) -> &str {
        &self.name
    }

    fn tick(&mut self, ctx: &mut RunContext) -> Result<NodeStatus, TickError> {
        if self.state.is_none() {
            match self.open(ctx)? {
                Some(state) => self.state = Some(state),
                None => return Ok(NodeStatus::Failure),
            }
        }
        let mut state = self.state.take().expect("opened above");
        for i in 0..state.requests.len() {
            let (worker, id, answered) = state.requests[i];
            if answered {
                continue;
            }
            match ctx.gateway.poll_response(id, ctx.now) {
                Response::Pending | Response::Completed => {}
                Response::Accepted => {
                    state.requests[i].2 = true;
                    let event = EventKind::RequestAccepted {
                        request: id,
                        worker: ctx.job.worker_id(worker).to_string(),
                        action: ctx.job.action_id(self.action).to_string(),
                    };
                    ctx.emit(event);
                }
                Response::Rejected => {
                    self.reject(ctx, &state, (worker, id))?;
                    return Ok(NodeStatus::Failure);
                }
                Response::Unknown => {
                    let message = format!("gateway lost request {id}");
                    ctx.emit(EventKind::Fault {
                        message: message.clone(),
                    });
                    return Err(TickError::fault(&self.name, message));
                }
            }
        }
        if state.requests.iter().all(|r| r.2) {
            self.accept(ctx, state.candidate)?;
            return Ok(NodeStatus::Success);
        }
        self.state = Some(state);
        Ok(NodeStatus::Running)
    }

    fn reset(&mut self) {
        self.state = None;
    }
}

/// Waits for every human member to confirm completion, then frees them.
pub struct ActionCompleted {
    name: String,
    action: usize,
    queries: Option<Vec<(usize, RequestId, bool)>>,
}

impl ActionCompleted {
    pub fn new(action: usize, id: &str) -> Self {
        ActionCompleted {
            name: format!("ActionCompleted:{id}"),
            action,
            queries: None,
        }
    }
}

impl Action<RunContext> for ActionCompleted {
    fn name(&self) -> &str {
        &self.name
    }

    fn tick(&mut self, ctx: &mut RunContext) -> Result<NodeStatus, TickError> {
        let a = self.action;
        let candidate = allocated(ctx, &self.name, a)?;
        if self.queries.is_none() {
            let started = ctx.starts[a].unwrap_or(ctx.now);
            let nominal = ctx.job.duration(candidate, a).unwrap_or(0.0);
            let mut queries = Vec::new();
            for h in humans(ctx, candidate) {
                let plan_action = &ctx.job.plan.actions[a];
                let query = CompletionQuery {
                    worker: h,
                    worker_id: ctx.job.worker_id(h).to_string(),
                    action: a,
                    action_id: plan_action.id.clone(),
                    label: plan_action.label.clone(),
                    started,
                    expected_duration: nominal,
                };
                let id = ctx.gateway.send_completion_query(query, ctx.now);
                queries.push((h, id, false));
                let event = EventKind::CompletionQuery {
                    request: id,
                    worker: ctx.job.worker_id(h).to_string(),
                    action: ctx.job.action_id(a).to_string(),
                };
                ctx.emit(event);
            }
            self.queries = Some(queries);
        }
        let queries = self.queries.as_mut().expect("initialized above");
        for q in queries.iter_mut().filter(|q| !q.2) {
            match ctx.gateway.poll_response(q.1, ctx.now) {
                Response::Completed => q.2 = true,
                Response::Unknown => {
                    return Err(TickError::fault(&self.name, format!("gateway lost query {}", q.1)))
                }
                _ => {}
            }
        }
        if queries.iter().all(|q| q.2) {
            for &(h, _, _) in queries.iter() {
                ctx.agents[h].release();
            }
            return Ok(NodeStatus::Success);
        }
        Ok(NodeStatus::Running)
    }

    fn reset(&mut self) {
        self.queries = None;
    }
}

/// Fallback over the robot branch, the human branch, and the rejection
/// escape that lets the manager re-queue the action.
pub fn build_helper_subtree(job: &Job, action: usize) -> Node<RunContext> {
    let id = job.action_id(action);
    let collaborative = job.plan.actions[action].collaborative;
    let robot = Node::sequence(
        format!("RobotBranch:{id}"),
        vec![
            Node::condition(AgentHandler::new(action, id)),
            Node::action(RobotAction::autonomous(action, id)),
        ],
    );
    let mut gate = vec![Node::decorator(
        Inverter,
        Node::condition(CollaborativeHandler::new(action, id)),
    )];
    if collaborative {
        gate.push(Node::action(RobotAction::collaborative(action, id)));
    }
    let execution = Node::parallel_all(
        format!("HumanExecution:{id}"),
        vec![
            Node::fallback(format!("CollaborationGate:{id}"), gate),
            Node::action(ActionCompleted::new(action, id)),
        ],
    );
    let human = Node::sequence(
        format!("HumanBranch:{id}"),
        vec![Node::action(HumanCommunication::new(action, id)), execution],
    );
    Node::fallback(
        format!("AH:{id}"),
        vec![robot, human, Node::condition(ActionRejected::new(action, id))],
    )
}
