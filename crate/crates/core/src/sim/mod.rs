//! Discrete-event simulation of a team executing a plan in virtual time,
//! plus the synthetic plans and timing harness used for scalability runs.

mod backend;
mod bench;
mod gateway;
mod generate;
mod trace;

pub use backend::SimBackend;
pub use bench::{run_benchmark, time_run, BenchmarkRow, BenchmarkSpec};
pub use gateway::{Policy, SimGateway};
pub use generate::{generate_plan, Topology, SYNTHETIC_COST_RANGE};
pub use trace::{ExecutionTrace, Rejection, TraceEntry, TraceOutcome};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bt::NodeStatus;
use crate::nodes::{EventKind, Run, RunConfig, RunError, RunEvent, SolverLog};
use crate::plan::WorkerKind;
use crate::plan::JobPlan;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub run: RunConfig,
    /// Answer policy per human worker id; others always accept.
    pub policies: BTreeMap<String, Policy>,
    /// Delay before a simulated human answers an offer, seconds.
    pub response_delay: f64,
    pub seed: u64,
    /// `(action id, primitive index)` pairs whose robot primitive faults.
    pub faults: Vec<(String, usize)>,
    /// Moves each human to an action's position when they start it.
    pub move_humans: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            run: RunConfig::default(),
            policies: BTreeMap::new(),
            response_delay: 0.0,
            seed: 0,
            faults: Vec::new(),
            move_humans: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub status: NodeStatus,
    pub error: Option<String>,
    pub trace: ExecutionTrace,
    pub events: Vec<RunEvent>,
    pub makespan: f64,
    pub solver: SolverLog,
}

impl SimOutcome {
    pub fn succeeded(&self) -> bool {
        self.status == NodeStatus::Success
    }
}

/// Builds a simulated run without starting it.
pub fn build_sim(plan: JobPlan, config: &SimConfig) -> Result<Run, RunError> {
    let mut gateway = SimGateway::new(config.seed).with_delay(config.response_delay);
    for (worker, policy) in &config.policies {
        gateway = gateway.with_policy(worker, policy.clone());
    }
    let mut backend = SimBackend::new();
    for (action, primitive) in &config.faults {
        if let Some(a) = plan.actions.iter().position(|x| &x.id == action) {
            backend = backend.with_fault(a, *primitive);
        }
    }
    Run::new(plan, &config.run, Box::new(gateway), Box::new(backend))
}

/// Drives the full tree and allocator in virtual time until the job ends.
/// An allocation fault ends the run with a partial trace.
pub fn run_sim(plan: JobPlan, config: &SimConfig) -> Result<SimOutcome, RunError> {
    let mut run = build_sim(plan, config)?;
    let status = if config.move_humans {
        run_moving_humans(&mut run)
    } else {
        run.run_to_end()
    };
    let trace = ExecutionTrace::from_events(&run.ctx.events);
    Ok(SimOutcome {
        status,
        error: run.error().map(str::to_string),
        makespan: trace.makespan(),
        trace,
        solver: run.ctx.solver,
        events: std::mem::take(&mut run.ctx.events),
    })
}

fn run_moving_humans(run: &mut Run) -> NodeStatus {
    let mut seen = 0;
    loop {
        if let Some(status) = run.step() {
            return status;
        }
        let job = run.ctx.job.clone();
        let moves: Vec<(usize, [f64; 3])> = run.ctx.events[seen..]
            .iter()
            .filter_map(|e| match &e.kind {
                EventKind::ActionStarted { action, candidate } => Some((action, candidate)),
                _ => None,
            })
            .filter_map(|(action, candidate)| {
                let position = job.plan.action(action)?.position?;
                let id = job.candidates.by_name(candidate)?;
                Some((id, position))
            })
            .flat_map(|(id, position)| {
                let job = &job;
                job.candidates
                    .get(id)
                    .members
                    .iter()
                    .filter(move |&&m| job.worker_kind(m) == WorkerKind::Human)
                    .map(move |&m| (m, position))
            })
            .collect();
        for (worker, position) in moves {
            run.set_position(worker, position);
        }
        seen = run.ctx.events.len();
    }
}
