use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{generate_plan, SimBackend, SimGateway, Topology};
use crate::nodes::{Run, RunConfig, RunError, Variant};
use crate::par::{self, Execution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub topology: Topology,
    pub actions: Vec<usize>,
    pub agents: Vec<usize>,
    pub variant: Variant,
    pub repetitions: usize,
    pub seed: u64,
}

impl BenchmarkSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.repetitions == 0 {
            return Err("repetitions must be at least 1".into());
        }
        if self.actions.is_empty() || self.agents.is_empty() {
            return Err("action and agent counts must not be empty".into());
        }
        if self.actions.iter().chain(&self.agents).any(|&n| n == 0) {
            return Err("action and agent counts must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub topology: Topology,
    pub variant: Variant,
    pub actions: usize,
    pub agents: usize,
    pub candidates: usize,
    pub repetitions: usize,
    /// Allocation compute time per run, seconds.
    pub mean_s: f64,
    pub std_s: f64,
    pub min_s: f64,
    pub max_s: f64,
    /// `mean_s` per action, milliseconds.
    pub per_action_ms: f64,
    /// Time spent inside the solver per run, seconds.
    pub solver_s: f64,
    pub solves: u64,
}

impl BenchmarkRow {
    pub const CSV_HEADER: &'static str =
        "topology,variant,actions,agents,candidates,repetitions,mean_s,std_s,min_s,max_s,per_action_ms,solver_s,solves";

    pub fn to_csv(&self) -> String {
        format!(
            "{:?},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.4},{:.6},{}",
            self.topology,
            self.variant.name(),
            self.actions,
            self.agents,
            self.candidates,
            self.repetitions,
            self.mean_s,
            self.std_s,
            self.min_s,
            self.max_s,
            self.per_action_ms,
            self.solver_s,
            self.solves
        )
        .to_lowercase()
    }
}

/// Times one run of the whole tree with instantaneous execution, from tree
/// construction to the last action's completion. Returns the elapsed time,
/// solver time, solve count and candidate count.
pub fn time_run(
    topology: Topology,
    actions: usize,
    agents: usize,
    variant: Variant,
    seed: u64,
) -> Result<(f64, f64, u64, usize), RunError> {
    let plan = generate_plan(topology, actions, agents, seed);
    let config = RunConfig {
        variant,
        ..RunConfig::default()
    };
    let started = Instant::now();
    let mut run = Run::new(
        plan,
        &config,
        Box::new(SimGateway::new(seed)),
        Box::new(SimBackend::instantaneous()),
    )?;
    let status = run.run_to_end();
    let elapsed = started.elapsed().as_secs_f64();
    if let Some(e) = run.error() {
        tracing::warn!(actions, agents, ?status, "benchmark run failed: {e}");
    }
    let log = run.ctx.solver;
    Ok((
        elapsed,
        log.total.as_secs_f64(),
        log.solves,
        run.ctx.job.candidates.len(),
    ))
}

/// Runs every `(actions, agents)` configuration `repetitions` times on the
/// same generated plan. Configurations are spread over the thread pool when
/// `exec` is parallel; use sequential execution for timings that must not
/// contend for cores.
pub fn run_benchmark(spec: &BenchmarkSpec, exec: Execution) -> Result<Vec<BenchmarkRow>, String> {
    spec.validate()?;
    let configs: Vec<(usize, usize)> = spec
        .actions
        .iter()
        .flat_map(|&m| spec.agents.iter().map(move |&n| (m, n)))
        .collect();
    let rows = par::map(exec, &configs, |&(m, n)| -> Result<BenchmarkRow, String> {
        let mut times = Vec::with_capacity(spec.repetitions);
        let mut solver = 0.0;
        let mut solves = 0;
        let mut candidates = 0;
        for _ in 0..spec.repetitions {
            let (t, s, k, c) =
                time_run(spec.topology, m, n, spec.variant, spec.seed).map_err(|e| e.to_string())?;
            times.push(t);
            solver += s;
            solves = k;
            candidates = c;
        }
        let reps = times.len() as f64;
        let mean = times.iter().sum::<f64>() / reps;
        let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / reps;
        Ok(BenchmarkRow {
            topology: spec.topology,
            variant: spec.variant,
            actions: m,
            agents: n,
            candidates,
            repetitions: spec.repetitions,
            mean_s: mean,
            std_s: var.sqrt(),
            min_s: times.iter().copied().fold(f64::INFINITY, f64::min),
            max_s: times.iter().copied().fold(0.0, f64::max),
            per_action_ms: mean / m as f64 * 1e3,
            solver_s: solver / reps,
            solves,
        })
    });
    rows.into_iter().collect()
}
