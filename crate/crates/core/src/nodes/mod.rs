//! The allocation-aware behavior tree: a role allocator at the root, one
//! allocator manager per action, and the helper subtree that routes each
//! allocation to robot execution or human negotiation.

mod allocator;
pub mod events;
pub mod gateway;
mod helper;
mod manager;
mod robot;
mod run;

pub use allocator::RoleAllocator;
pub use events::{parse_log, EventKind, LogParseError, RunEvent};
pub use gateway::{CompletionQuery, NegotiationGateway, NegotiationRequest, RequestId, Response};
pub use helper::{
    build_helper_subtree, ActionCompleted, ActionRejected, AgentHandler, CollaborativeHandler,
    HumanCommunication,
};
pub use manager::AllocatorManager;
pub use robot::{ExecutionBackend, Primitive, PrimitiveCommand, PrimitiveStatus, RobotAction};
pub use run::{Run, RunConfig, RunError, SolverLog};

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::alloc::{CandidateId, CountRule, Mode};
use crate::bt::{Blackboard, BoardKey, Node, TickError};
use crate::cost::CostModel;
use crate::plan::{Group, Job, PlanNode, WorkerKind};

/// Allocator configuration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Multi-task with worker pairs.
    #[default]
    CollabMt,
    /// Multi-task, single workers only.
    CoopMt,
    /// Single workers; pending actions are allocated as a batch only when
    /// the whole team is idle.
    CoopSt,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::CollabMt, Variant::CoopMt, Variant::CoopSt];

    pub fn mode(self) -> Mode {
        match self {
            Variant::CollabMt => Mode::Collaborative,
            Variant::CoopMt | Variant::CoopSt => Mode::Cooperative,
        }
    }

    pub fn max_combo(self) -> usize {
        match self {
            Variant::CollabMt => 2,
            Variant::CoopMt | Variant::CoopSt => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::CollabMt => "collab-mt",
            Variant::CoopMt => "coop-mt",
            Variant::CoopSt => "coop-st",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown variant `{s}` (expected collab-mt, coop-mt or coop-st)"))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionPhase {
    /// Not reached by the tree yet.
    #[default]
    Idle,
    /// Waiting for an allocation that can start.
    Pending,
    /// A request is out to the allocated humans.
    Negotiating,
    Executing,
    Completed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub id: String,
    pub kind: WorkerKind,
    pub available: bool,
    pub busy_action: Option<usize>,
    /// Start of the busy action's execution; absent while negotiating.
    pub busy_since: Option<f64>,
    /// Nominal duration of the busy action.
    pub busy_nominal: Option<f64>,
}

impl AgentRecord {
    pub fn new(id: &str, kind: WorkerKind) -> Self {
        AgentRecord {
            id: id.to_string(),
            kind,
            available: true,
            busy_action: None,
            busy_since: None,
            busy_nominal: None,
        }
    }

    pub fn engage(&mut self, action: usize, nominal: f64) {
        self.available = false;
        self.busy_action = Some(action);
        self.busy_nominal = Some(nominal);
    }

    pub fn release(&mut self) {
        self.available = true;
        self.busy_action = None;
        self.busy_since = None;
        self.busy_nominal = None;
    }
}

/// Shared lists exchanged by the allocation nodes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AllocationBoardView {
    pub acts_to_be_allocated: BTreeSet<usize>,
    pub actions_rejected: BTreeSet<usize>,
    /// Candidate per action.
    pub current_allocation: BTreeMap<usize, CandidateId>,
}

pub const ALLOCATION_KEY: &str = "allocation";

/// Everything the allocation nodes read and write during a tick.
pub struct RunContext {
    pub board: Blackboard,
    pub job: Arc<Job>,
    pub variant: Variant,
    pub count_rule: CountRule,
    pub costs: CostModel,
    pub gateway: Box<dyn NegotiationGateway>,
    pub backend: Box<dyn ExecutionBackend>,
    pub agents: Vec<AgentRecord>,
    /// Run time in seconds.
    pub now: f64,
    pub events: Vec<RunEvent>,
    pub phases: Vec<ActionPhase>,
    pub starts: Vec<Option<f64>>,
    pub solver: SolverLog,
    seq: u64,
}

impl RunContext {
    pub fn new(
        job: Arc<Job>,
        variant: Variant,
        costs: CostModel,
        gateway: Box<dyn NegotiationGateway>,
        backend: Box<dyn ExecutionBackend>,
    ) -> Self {
        let mut board = Blackboard::new();
        board.set(BoardKey::shared(ALLOCATION_KEY), AllocationBoardView::default());
        let agents = job
            .plan
            .workers
            .iter()
            .map(|w| AgentRecord::new(&w.id, w.kind))
            .collect();
        let n = job.action_count();
        RunContext {
            board,
            job,
            variant,
            count_rule: CountRule::default(),
            costs,
            gateway,
            backend,
            agents,
            now: 0.0,
            events: Vec::new(),
            phases: vec![ActionPhase::Idle; n],
            starts: vec![None; n],
            solver: SolverLog::default(),
            seq: 0,
        }
    }

    pub fn view(&self) -> Result<&AllocationBoardView, TickError> {
        Ok(self.board.get(&BoardKey::shared(ALLOCATION_KEY))?)
    }

    pub fn view_mut(&mut self) -> Result<&mut AllocationBoardView, TickError> {
        Ok(self.board.get_mut(&BoardKey::shared(ALLOCATION_KEY))?)
    }

    pub fn allocation_of(&self, action: usize) -> Result<Option<CandidateId>, TickError> {
        Ok(self.view()?.current_allocation.get(&action).copied())
    }

    pub fn emit(&mut self, kind: EventKind) {
        self.seq += 1;
        self.events.push(RunEvent {
            seq: self.seq,
            time: self.now,
            kind,
        });
    }

    pub fn candidate_name(&self, candidate: CandidateId) -> &str {
        &self.job.candidates.get(candidate).name
    }

    pub fn members(&self, candidate: CandidateId) -> &[usize] {
        &self.job.candidates.get(candidate).members
    }
}

/// Compiles the plan into a tree: the role allocator over the task structure,
/// with every action wrapped in a manager and its helper subtree.
pub fn compile_plan(job: &Job) -> Node<RunContext> {
    Node::decorator(RoleAllocator::new(), compile_structure(job, &job.plan.structure))
}

fn compile_structure(job: &Job, node: &PlanNode) -> Node<RunContext> {
    match node {
        PlanNode::Action(id) => {
            let a = job.action_index(id).expect("validated plan references known actions");
            Node::decorator(AllocatorManager::new(a, id), build_helper_subtree(job, a))
        }
        PlanNode::Group(Group::Sequence(children)) => Node::sequence(
            "Sequence",
            children.iter().map(|c| compile_structure(job, c)).collect(),
        ),
        PlanNode::Group(Group::Parallel(children)) => Node::parallel_all(
            "Parallel",
            children.iter().map(|c| compile_structure(job, c)).collect(),
        ),
    }
}
