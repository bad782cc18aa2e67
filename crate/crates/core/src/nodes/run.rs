use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::events::EventKind;
use super::{compile_plan, ActionPhase, ExecutionBackend, NegotiationGateway, RunContext, Variant};
use crate::alloc::{CountRule, SolveStats};
use crate::bt::{NodeStatus, StructureError, TickRate, Tree, VirtualClock};
use crate::cost::{CostConfig, CostError, CostModel, Vec3};
use crate::plan::{Job, JobPlan, PlanErrors};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub variant: Variant,
    pub costs: CostConfig,
    pub rate: TickRate,
    pub count_rule: CountRule,
    /// Run time after which an unfinished run is stopped, seconds.
    pub max_time: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            variant: Variant::default(),
            costs: CostConfig::default(),
            rate: TickRate::default(),
            count_rule: CountRule::default(),
            max_time: 24.0 * 3600.0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Plan(#[from] PlanErrors),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// Solver effort accumulated over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverLog {
    pub solves: u64,
    pub total: Duration,
    pub max: Duration,
    pub lp_solves: u64,
    pub nodes: u64,
}

impl SolverLog {
    pub fn record(&mut self, elapsed: Duration, stats: &SolveStats) {
        self.solves += 1;
        self.total += elapsed;
        self.max = self.max.max(elapsed);
        self.lp_solves += stats.lp_solves as u64;
        self.nodes += stats.nodes as u64;
    }
}

/// A compiled tree with its context, stepped one tick at a time.
pub struct Run {
    tree: Tree<RunContext>,
    pub ctx: RunContext,
    clock: VirtualClock,
    max_time: f64,
    status: Option<NodeStatus>,
    error: Option<String>,
}

impl Run {
    pub fn new(
        plan: JobPlan,
        config: &RunConfig,
        gateway: Box<dyn NegotiationGateway>,
        backend: Box<dyn ExecutionBackend>,
    ) -> Result<Self, RunError> {
        let job = Arc::new(Job::new(plan, config.variant.max_combo())?);
        Self::from_job(job, config, gateway, backend)
    }

    /// `job` must have been built for `config.variant`'s combination size.
    pub fn from_job(
        job: Arc<Job>,
        config: &RunConfig,
        gateway: Box<dyn NegotiationGateway>,
        backend: Box<dyn ExecutionBackend>,
    ) -> Result<Self, RunError> {
        let costs = CostModel::new(&job, config.costs)?;
        let tree = Tree::new(compile_plan(&job))?;
        let mut ctx = RunContext::new(job.clone(), config.variant, costs, gateway, backend);
        ctx.count_rule = config.count_rule;
        ctx.emit(EventKind::RunStarted {
            job: job.plan.name.clone(),
            variant: config.variant,
            workers: job.plan.workers.iter().map(|w| w.id.clone()).collect(),
            actions: job.plan.actions.iter().map(|a| a.id.clone()).collect(),
        });
        Ok(Run {
            tree,
            ctx,
            clock: VirtualClock::new(config.rate),
            max_time: config.max_time,
            status: None,
            error: None,
        })
    }

    pub fn tree(&self) -> &Tree<RunContext> {
        &self.tree
    }

    pub fn now(&self) -> f64 {
        self.clock.now()
    }

    pub fn status(&self) -> Option<NodeStatus> {
        self.status
    }

    pub fn error(&self) -> Option<&str> {
        self.error.as_deref()
    }

    pub fn is_finished(&self) -> bool {
        self.status.is_some()
    }

    /// Ticks once at the current time and advances the clock. Returns the
    /// final status once the run has ended.
    pub fn step(&mut self) -> Option<NodeStatus> {
        if self.status.is_some() {
            return self.status;
        }
        self.ctx.now = self.clock.now();
        match self.tree.tick(&mut self.ctx) {
            Ok(NodeStatus::Running) if self.ctx.now >= self.max_time => {
                let message = format!("run stopped at the {} s limit", self.max_time);
                self.fail(message);
            }
            Ok(NodeStatus::Running) => {}
            Ok(status) => self.finish(status),
            Err(e) => self.fail(e.to_string()),
        }
        if self.status.is_none() {
            self.clock.advance();
        }
        self.status
    }

    pub fn run_to_end(&mut self) -> NodeStatus {
        loop {
            if let Some(status) = self.step() {
                return status;
            }
        }
    }

    pub fn set_position(&mut self, worker: usize, position: Vec3) {
        let now = self.clock.now();
        self.ctx.costs.positions.set(worker, position, now);
        let event = EventKind::PositionUpdated {
            worker: self.ctx.job.worker_id(worker).to_string(),
            position,
        };
        self.ctx.now = now;
        self.ctx.emit(event);
    }

    pub fn alert(&mut self, message: String) {
        self.ctx.now = self.clock.now();
        self.ctx.emit(EventKind::Alert { message });
    }

    /// Latest end time over completed actions.
    pub fn makespan(&self) -> f64 {
        self.ctx
            .events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::ActionFinished { .. }))
            .map(|e| e.time)
            .fold(0.0, f64::max)
    }

    pub fn completed(&self) -> usize {
        self.ctx
            .phases
            .iter()
            .filter(|&&p| p == ActionPhase::Completed)
            .count()
    }

    fn fail(&mut self, message: String) {
        let already = self
            .ctx
            .events
            .last()
            .is_some_and(|e| matches!(&e.kind, EventKind::Fault { message: m } if message.contains(m.as_str())));
        if !already {
            self.ctx.emit(EventKind::Fault {
                message: message.clone(),
            });
        }
        self.error = Some(message);
        self.finish(NodeStatus::Failure);
    }

    fn finish(&mut self, status: NodeStatus) {
        self.status = Some(status);
        let makespan = self.makespan();
        self.ctx.emit(EventKind::RunFinished { status, makespan });
    }
}
