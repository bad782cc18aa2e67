//! Run lifecycle: building runs from job documents, driving their tick
//! loops, recording their event logs and exposing snapshots.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use teamalloc::alloc::CandidateId;
use teamalloc::bt::{NodeStatus, TickRate};
use teamalloc::cost::Vec3;
use teamalloc::nodes::{ActionPhase, EventKind, NegotiationGateway, Run, RunConfig, RunError};
use teamalloc::plan::WorkerKind;
use teamalloc::sim::{ExecutionTrace, Policy, SimBackend, SimGateway, TraceEntry, TraceOutcome};
use tokio::sync::broadcast;

use crate::document::LoadedJob;
use crate::session::{LiveGateway, LiveSession, RoutedGateway};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// Every human is simulated.
    #[default]
    Simulated,
    /// Every human answers through the console.
    Live,
    /// Console-flagged humans answer through the console, the rest are
    /// simulated.
    Mixed,
}

impl std::str::FromStr for RunMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simulated" => Ok(RunMode::Simulated),
            "live" => Ok(RunMode::Live),
            "mixed" => Ok(RunMode::Mixed),
            _ => Err(format!("unknown mode `{s}` (expected simulated, live or mixed)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pacing {
    /// A background thread ticks at the configured rate, `scale` times
    /// faster than real time.
    RealTime { scale: f64 },
    /// A background thread ticks without pausing.
    Virtual,
    /// Ticks only when the owner calls [`RunHandle::step`].
    Manual,
}

impl Pacing {
    /// Virtual time for simulated runs, real time when people take part.
    pub fn for_mode(mode: RunMode) -> Self {
        match mode {
            RunMode::Simulated => Pacing::Virtual,
            RunMode::Live | RunMode::Mixed => Pacing::RealTime { scale: 1.0 },
        }
    }
}

/// How simulated humans behave.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulatedHumans {
    pub seed: u64,
    /// Seconds before a simulated human answers an offer.
    pub response_delay: f64,
    pub policies: BTreeMap<String, Policy>,
    /// Moves each simulated human to an action's position when they start it.
    pub move_humans: bool,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub mode: RunMode,
    /// Defaults to [`Pacing::for_mode`].
    pub pacing: Option<Pacing>,
    pub humans: SimulatedHumans,
    /// Run seconds an unanswered console request may wait before an alert.
    pub soft_timeout: Option<f64>,
    /// Overrides the document's run configuration.
    pub config: Option<RunConfig>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            mode: RunMode::Simulated,
            pacing: None,
            humans: SimulatedHumans::default(),
            soft_timeout: None,
            config: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Success,
    Failure,
    /// Stopped from outside before the tree finished.
    Stopped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionStatus {
    /// Not started, whether or not the tree has reached it.
    Pending,
    Negotiating,
    Executing,
    Completed,
}

impl From<ActionPhase> for ActionStatus {
    fn from(phase: ActionPhase) -> Self {
        match phase {
            ActionPhase::Idle | ActionPhase::Pending => ActionStatus::Pending,
            ActionPhase::Negotiating => ActionStatus::Negotiating,
            ActionPhase::Executing => ActionStatus::Executing,
            ActionPhase::Completed => ActionStatus::Completed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ActionState {
    pub id: String,
    pub label: String,
    pub status: ActionStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidate: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub end: Option<f64>,
    pub rejections: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct WorkerState {
    pub id: String,
    pub kind: WorkerKind,
    /// Answers through the console in this run.
    pub console: bool,
    pub available: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<Vec3>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoardState {
    pub acts_to_be_allocated: Vec<String>,
    pub actions_rejected: Vec<String>,
    /// Candidate per action.
    pub current_allocation: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverState {
    pub solves: u64,
    pub total_ms: f64,
    pub max_ms: f64,
    pub lp_solves: u64,
    pub nodes: u64,
}

/// Everything the console's run view shows.
#[derive(Debug, Clone, Serialize)]
pub struct Snapshot {
    pub run: String,
    pub job: String,
    pub mode: RunMode,
    pub variant: String,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Run time, seconds.
    pub time: f64,
    pub makespan: f64,
    pub actions: Vec<ActionState>,
    pub workers: Vec<WorkerState>,
    pub board: BoardState,
    /// Current base cost per candidate of each unfinished action.
    pub costs: BTreeMap<String, BTreeMap<String, f64>>,
    pub gantt: Vec<TraceEntry>,
    pub solver: SolverState,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub run: String,
    pub job: String,
    pub mode: RunMode,
    pub status: RunStatus,
    pub time: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum HandleError {
    #[error("worker `{0}` is not part of this run")]
    UnknownWorker(String),
    #[error("run has ended")]
    Ended,
}

enum Command {
    Position(usize, Vec3),
}

struct Inner {
    run: Run,
    emitted: usize,
    log: Vec<String>,
    file: Option<BufWriter<File>>,
    stopped: bool,
}

/// One run and its recorded log.
pub struct RunHandle {
    pub id: String,
    pub job: String,
    pub mode: RunMode,
    rate: TickRate,
    console: Vec<String>,
    move_humans: bool,
    session: Option<LiveSession>,
    inner: Mutex<Inner>,
    /// Changes requested from outside, applied by the next tick.
    queue: Mutex<Vec<Command>>,
    stop_requested: AtomicBool,
    log_tx: broadcast::Sender<String>,
}

impl RunHandle {
    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn session(&self) -> Option<&LiveSession> {
        self.session.as_ref()
    }

    /// Read access to the run, under the tick lock.
    pub fn with_run<R>(&self, f: impl FnOnce(&Run) -> R) -> R {
        f(&self.lock().run)
    }

    /// Whether `worker` answers through the console in this run.
    pub fn is_console(&self, worker: &str) -> bool {
        self.console.iter().any(|w| w == worker)
    }

    pub fn has_worker(&self, worker: &str) -> bool {
        self.lock().run.ctx.job.worker_index(worker).is_some()
    }

    /// Ticks once. Returns true once the run has ended or was stopped.
    pub fn step(&self) -> bool {
        let mut inner = self.lock();
        if inner.stopped || inner.run.is_finished() {
            return true;
        }
        let commands = std::mem::take(&mut *self.queue.lock().unwrap_or_else(|e| e.into_inner()));
        for command in commands {
            match command {
                Command::Position(worker, position) => inner.run.set_position(worker, position),
            }
        }
        if self.stop_requested.load(Ordering::Acquire) {
            inner.run.alert("run stopped".into());
            inner.stopped = true;
        } else {
            inner.run.step();
            if self.move_humans {
                self.move_simulated_humans(&mut inner);
            }
            if let Some(session) = &self.session {
                for alert in session.take_alerts() {
                    inner.run.alert(alert);
                }
            }
        }
        self.flush(&mut inner);
        let done = inner.stopped || inner.run.is_finished();
        if done {
            if let Some(session) = &self.session {
                session.cancel_open();
            }
        }
        done
    }

    fn move_simulated_humans(&self, inner: &mut Inner) {
        let job = inner.run.ctx.job.clone();
        let mut moves = Vec::new();
        for event in &inner.run.ctx.events[inner.emitted..] {
            let EventKind::ActionStarted { action, candidate } = &event.kind else {
                continue;
            };
            let (Some(position), Some(c)) = (
                job.plan.action(action).and_then(|a| a.position),
                job.candidates.by_name(candidate),
            ) else {
                continue;
            };
            for &m in &job.candidates.get(c).members {
                if job.worker_kind(m) == WorkerKind::Human && !self.is_console(job.worker_id(m)) {
                    moves.push((m, position));
                }
            }
        }
        for (worker, position) in moves {
            inner.run.set_position(worker, position);
        }
    }

    /// Ticks for `secs` of run time or until the run ends.
    pub fn advance(&self, secs: f64) -> bool {
        for _ in 0..self.rate.ticks_for(secs) {
            if self.step() {
                return true;
            }
        }
        self.is_finished()
    }

    /// Ticks until `done` holds, the run ends or `limit` run seconds pass.
    /// Returns whether `done` held.
    pub fn advance_until(&self, limit: f64, done: impl Fn(&Snapshot) -> bool) -> bool {
        for _ in 0..self.rate.ticks_for(limit) {
            if done(&self.snapshot()) {
                return true;
            }
            if self.step() {
                break;
            }
        }
        done(&self.snapshot())
    }

    pub fn is_finished(&self) -> bool {
        let inner = self.lock();
        inner.stopped || inner.run.is_finished()
    }

    /// Blocks until the run ends or `timeout` of wall time passes.
    pub fn wait(&self, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        while Instant::now() < deadline {
            if self.is_finished() {
                return true;
            }
            std::thread::sleep(Duration::from_millis(2));
        }
        self.is_finished()
    }

    /// Asks the run to stop at its next tick.
    pub fn stop(&self) {
        self.stop_requested.store(true, Ordering::Release);
    }

    /// Queues a position update for the next tick.
    pub fn set_position(&self, worker: &str, position: Vec3) -> Result<(), HandleError> {
        let inner = self.lock();
        let index = inner
            .run
            .ctx
            .job
            .worker_index(worker)
            .ok_or_else(|| HandleError::UnknownWorker(worker.to_string()))?;
        if inner.stopped || inner.run.is_finished() {
            return Err(HandleError::Ended);
        }
        drop(inner);
        self.queue
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(Command::Position(index, position));
        Ok(())
    }

    pub fn log_text(&self) -> String {
        let inner = self.lock();
        let mut out = inner.log.join("\n");
        if !out.is_empty() {
            out.push('\n');
        }
        out
    }

    /// Log lines so far plus a receiver for the ones that follow.
    pub fn follow_log(&self) -> (Vec<String>, broadcast::Receiver<String>) {
        let inner = self.lock();
        (inner.log.clone(), self.log_tx.subscribe())
    }

    fn flush(&self, inner: &mut Inner) {
        let Inner { run, emitted, log, file, .. } = inner;
        for event in &run.ctx.events[*emitted..] {
            let line = event.to_log_line();
            if let Some(f) = file.as_mut() {
                if let Err(e) = writeln!(f, "{line}") {
                    tracing::warn!(run = %self.id, "cannot write event log: {e}");
                }
            }
            let _ = self.log_tx.send(line.clone());
            log.push(line);
        }
        *emitted = run.ctx.events.len();
        if let Some(f) = file.as_mut() {
            let _ = f.flush();
        }
    }

    pub fn summary(&self) -> RunSummary {
        let inner = self.lock();
        RunSummary {
            run: self.id.clone(),
            job: self.job.clone(),
            mode: self.mode,
            status: status_of(&inner),
            time: inner.run.now(),
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        let inner = self.lock();
        let run = &inner.run;
        let ctx = &run.ctx;
        let job = &ctx.job;
        let trace = ExecutionTrace::from_events(&ctx.events);
        let view = ctx.view().ok();
        let mut rejections: HashMap<&str, usize> = HashMap::new();
        for r in &trace.rejections {
            *rejections.entry(r.action.as_str()).or_default() += 1;
        }
        let mut running: HashMap<&str, &str> = HashMap::new();
        for e in &ctx.events {
            if let EventKind::ActionStarted { action, candidate } = &e.kind {
                running.insert(action, candidate);
            }
        }
        let actions = job
            .plan
            .actions
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let done = trace.entries.iter().find(|t| t.action == a.id && t.outcome == TraceOutcome::Completed);
                let allocated = view
                    .and_then(|v| v.current_allocation.get(&i))
                    .map(|&c| job.candidates.get(c).name.clone());
                ActionState {
                    id: a.id.clone(),
                    label: a.label.clone(),
                    status: ctx.phases[i].into(),
                    candidate: done
                        .map(|t| t.candidate.clone())
                        .or_else(|| running.get(a.id.as_str()).map(|c| c.to_string()))
                        .or(allocated),
                    start: done.map(|t| t.start).or(ctx.starts[i]),
                    end: done.map(|t| t.end),
                    rejections: rejections.get(a.id.as_str()).copied().unwrap_or(0),
                }
            })
            .collect();
        let workers = ctx
            .agents
            .iter()
            .enumerate()
            .map(|(i, agent)| WorkerState {
                id: agent.id.clone(),
                kind: agent.kind,
                console: self.is_console(&agent.id),
                available: agent.available,
                action: agent.busy_action.map(|a| job.action_id(a).to_string()),
                position: ctx.costs.positions.workers.get(i).copied().flatten(),
            })
            .collect();
        let names = |set: &std::collections::BTreeSet<usize>| set.iter().map(|&a| job.action_id(a).to_string()).collect();
        let board = match view {
            Some(v) => BoardState {
                acts_to_be_allocated: names(&v.acts_to_be_allocated),
                actions_rejected: names(&v.actions_rejected),
                current_allocation: v
                    .current_allocation
                    .iter()
                    .map(|(&a, &c)| (job.action_id(a).to_string(), job.candidates.get(c).name.clone()))
                    .collect(),
            },
            None => BoardState {
                acts_to_be_allocated: Vec::new(),
                actions_rejected: Vec::new(),
                current_allocation: BTreeMap::new(),
            },
        };
        let costs = (0..job.action_count())
            .filter(|&a| ctx.phases[a] != ActionPhase::Completed)
            .map(|a| {
                let row = job
                    .candidates
                    .iter()
                    .enumerate()
                    .filter_map(|(c, cand)| {
                        let cost = ctx.costs.base_cost(job, CandidateId(c), a)?;
                        Some((cand.name.clone(), cost))
                    })
                    .collect();
                (job.action_id(a).to_string(), row)
            })
            .collect();
        let solver = ctx.solver;
        Snapshot {
            run: self.id.clone(),
            job: self.job.clone(),
            mode: self.mode,
            variant: ctx.variant.name().to_string(),
            status: status_of(&inner),
            error: run.error().map(str::to_string),
            time: run.now(),
            makespan: trace.makespan(),
            actions,
            workers,
            board,
            costs,
            gantt: trace.entries,
            solver: SolverState {
                solves: solver.solves,
                total_ms: solver.total.as_secs_f64() * 1e3,
                max_ms: solver.max.as_secs_f64() * 1e3,
                lp_solves: solver.lp_solves,
                nodes: solver.nodes,
            },
        }
    }
}

fn status_of(inner: &Inner) -> RunStatus {
    match inner.run.status() {
        Some(NodeStatus::Success) => RunStatus::Success,
        Some(_) => RunStatus::Failure,
        None if inner.stopped => RunStatus::Stopped,
        None => RunStatus::Running,
    }
}

/// All runs started by this process.
pub struct RunManager {
    runs: Mutex<Vec<Arc<RunHandle>>>,
    next: AtomicU64,
    log_dir: Option<PathBuf>,
}

impl RunManager {
    pub fn new(log_dir: Option<PathBuf>) -> Self {
        RunManager {
            runs: Mutex::new(Vec::new()),
            next: AtomicU64::new(1),
            log_dir,
        }
    }

    fn runs(&self) -> MutexGuard<'_, Vec<Arc<RunHandle>>> {
        self.runs.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn start(&self, job: &LoadedJob, options: &RunOptions) -> Result<Arc<RunHandle>, RunError> {
        let id = format!("run-{}", self.next.fetch_add(1, Ordering::Relaxed));
        let config = options.config.unwrap_or(job.config());
        let humans: Vec<String> = job
            .plan
            .workers
            .iter()
            .filter(|w| w.kind == WorkerKind::Human)
            .map(|w| w.id.clone())
            .collect();
        let console: Vec<String> = match options.mode {
            RunMode::Simulated => Vec::new(),
            RunMode::Live => humans,
            RunMode::Mixed => job.console_workers(),
        };
        let mut sim = SimGateway::new(options.humans.seed).with_delay(options.humans.response_delay);
        for (worker, policy) in &options.humans.policies {
            sim = sim.with_policy(worker, policy.clone());
        }
        let session = (!console.is_empty()).then(|| {
            let instructions = job
                .document
                .actions
                .iter()
                .filter_map(|a| Some((a.id.clone(), a.instruction.clone()?)))
                .collect();
            LiveSession::new(&id, instructions, options.soft_timeout)
        });
        let gateway: Box<dyn NegotiationGateway> = match &session {
            None => Box::new(sim),
            Some(s) if options.mode == RunMode::Live => Box::new(LiveGateway::new(s.clone())),
            Some(s) => Box::new(RoutedGateway::new(LiveGateway::new(s.clone()), sim, console.clone())),
        };
        let mut run = Run::new(job.plan.clone(), &config, gateway, Box::new(SimBackend::new()))?;
        let shared = run.ctx.job.clone();
        job.apply_gains(&shared, &mut run.ctx.costs);
        let file = self.log_dir.as_ref().and_then(|dir| {
            let path = dir.join(format!("{id}.log"));
            match File::create(&path) {
                Ok(f) => Some(BufWriter::new(f)),
                Err(e) => {
                    tracing::warn!("cannot create {}: {e}", path.display());
                    None
                }
            }
        });
        let handle = Arc::new(RunHandle {
            id,
            job: job.name().to_string(),
            mode: options.mode,
            rate: config.rate,
            console,
            move_humans: options.humans.move_humans,
            session,
            queue: Mutex::new(Vec::new()),
            stop_requested: AtomicBool::new(false),
            inner: Mutex::new(Inner {
                run,
                emitted: 0,
                log: Vec::new(),
                file,
                stopped: false,
            }),
            log_tx: broadcast::channel(1024).0,
        });
        handle.flush(&mut handle.lock());
        self.runs().push(handle.clone());
        tracing::info!(run = %handle.id, job = %handle.job, mode = ?handle.mode, "run started");
        let period = match options.pacing.unwrap_or(Pacing::for_mode(options.mode)) {
            Pacing::RealTime { scale } => Some(config.rate.period_secs() / scale),
            Pacing::Virtual => Some(0.0),
            Pacing::Manual => None,
        };
        if let Some(period) = period {
            let ticker = handle.clone();
            std::thread::spawn(move || tick_loop(&ticker, period));
        }
        Ok(handle)
    }

    pub fn get(&self, id: &str) -> Option<Arc<RunHandle>> {
        self.runs().iter().find(|r| r.id == id).cloned()
    }

    pub fn list(&self) -> Vec<RunSummary> {
        self.runs().iter().map(|r| r.summary()).collect()
    }

    /// Most recent run with `worker`, preferring runs still going.
    pub fn latest_for_worker(&self, worker: &str) -> Option<Arc<RunHandle>> {
        let runs = self.runs();
        let with_worker: Vec<&Arc<RunHandle>> = runs.iter().rev().filter(|r| r.has_worker(worker)).collect();
        with_worker
            .iter()
            .find(|r| !r.is_finished())
            .or(with_worker.first())
            .map(|r| Arc::clone(r))
    }

    pub fn stop_all(&self) {
        for run in self.runs().iter() {
            run.stop();
        }
    }
}

fn tick_loop(handle: &RunHandle, period: f64) {
    let start = Instant::now();
    let mut ticks: u64 = 0;
    loop {
        if handle.step() {
            break;
        }
        ticks += 1;
        if period.is_finite() && period > 0.0 {
            let due = start + Duration::from_secs_f64(period * ticks as f64);
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
        }
    }
    let summary = handle.summary();
    tracing::info!(run = %summary.run, status = ?summary.status, time = summary.time, "run ended");
}
