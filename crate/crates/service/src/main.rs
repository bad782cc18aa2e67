use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde_json::json;
use teamalloc::alloc::CountRule;
use teamalloc::cost::CostMetric;
use teamalloc::nodes::Variant;
use teamalloc::par::Execution;
use teamalloc::sim::{run_benchmark, BenchmarkRow, BenchmarkSpec, Policy, Topology};
use teamalloc_service::api::{self, AppState};
use teamalloc_service::document::{load_job_file, LoadedJob};
use teamalloc_service::manager::{Pacing, RunManager, RunMode, RunOptions, RunStatus, SimulatedHumans};
use teamalloc_service::replay::replay_text;

#[derive(Parser)]
#[command(name = "teamalloc", version, about = "Allocate and run human-robot team jobs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a job and print a JSON summary.
    Run(RunArgs),
    /// Time whole runs on generated plans and print CSV.
    Bench(BenchArgs),
    /// Serve the HTTP API for the operator console.
    Serve(ServeArgs),
    /// Rebuild a run's outcome from its event log.
    Replay {
        log: PathBuf,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    job: PathBuf,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long, value_parser = parse_metric)]
    cost: Option<CostMetric>,
    #[arg(long, value_parser = parse_count_rule)]
    count_rule: Option<CountRule>,
    /// Seed for probabilistic simulated humans.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seconds before a simulated human answers an offer.
    #[arg(long, default_value_t = 0.0)]
    delay: f64,
    /// Scripted rejection `worker:action[:times]`; repeatable.
    #[arg(long = "reject", value_name = "WORKER:ACTION[:N]")]
    rejections: Vec<String>,
    /// Simulated humans walk to each action they start.
    #[arg(long)]
    move_humans: bool,
    /// Write the execution trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the event log.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(clap::Args)]
struct BenchArgs {
    #[arg(long)]
    topology: Topology,
    /// Action counts: `A..B[:step]`, a list `a,b,c`, or one number.
    #[arg(long)]
    actions: String,
    /// Agent counts, same forms as `--actions`.
    #[arg(long)]
    agents: String,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value = "collab-mt")]
    variant: Variant,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Time configurations one at a time instead of across threads.
    #[arg(long)]
    sequential: bool,
}

#[derive(clap::Args)]
struct ServeArgs {
    /// Default job for `POST /runs`.
    job: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    /// Mode for runs that do not name one.
    #[arg(long, default_value = "mixed")]
    mode: RunMode,
    /// Directory for per-run event logs.
    #[arg(long)]
    log_dir: Option<PathBuf>,
    /// Real-time speed-up for live and mixed runs.
    #[arg(long)]
    time_scale: Option<f64>,
    /// Run seconds before an unanswered console request raises an alert.
    #[arg(long)]
    soft_timeout: Option<f64>,
    /// Start a run of the job right away.
    #[arg(long)]
    start: bool,
}

fn parse_metric(s: &str) -> Result<CostMetric, String> {
    match s {
        "duration" => Ok(CostMetric::Duration),
        "distance" => Ok(CostMetric::Distance),
        _ => Err(format!("unknown cost model `{s}` (expected duration or distance)")),
    }
}

fn parse_count_rule(s: &str) -> Result<CountRule, String> {
    match s {
        "ceil" => Ok(CountRule::Ceil),
        "floor" => Ok(CountRule::Floor),
        _ => Err(format!("unknown count rule `{s}` (expected ceil or floor)")),
    }
}

/// `A..B[:step]` (inclusive), `a,b,c` or `n`.
fn parse_counts(s: &str) -> Result<Vec<usize>, String> {
    let bad = |e: std::num::ParseIntError| format!("bad count in `{s}`: {e}");
    if let Some((from, rest)) = s.split_once("..") {
        let (to, step) = match rest.split_once(':') {
            Some((to, step)) => (to, step.parse().map_err(bad)?),
            None => (rest, 1),
        };
        let (from, to): (usize, usize) = (from.parse().map_err(bad)?, to.parse().map_err(bad)?);
        if step == 0 || from > to {
            return Err(format!("empty range `{s}`"));
        }
        return Ok((from..=to).step_by(step).collect());
    }
    s.split(',').map(|p| p.trim().parse().map_err(bad)).collect()
}

fn parse_rejection(s: &str) -> Result<(String, String, u32), String> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [w, a] => Ok((w.to_string(), a.to_string(), 1)),
        [w, a, n] => Ok((w.to_string(), a.to_string(), n.parse().map_err(|e| format!("bad count in `{s}`: {e}"))?)),
        _ => Err(format!("expected WORKER:ACTION[:N], got `{s}`")),
    }
}

fn load(path: &Path) -> Result<LoadedJob, String> {
    load_job_file(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn run(args: RunArgs) -> Result<bool, String> {
    let job = load(&args.job)?;
    let mut config = job.config();
    if let Some(v) = args.variant {
        config.variant = v;
    }
    if let Some(m) = args.cost {
        config.costs.metric = m;
    }
    if let Some(r) = args.count_rule {
        config.count_rule = r;
    }
    let mut humans = SimulatedHumans {
        seed: args.seed,
        response_delay: args.delay,
        move_humans: args.move_humans,
        ..SimulatedHumans::default()
    };
    for spec in &args.rejections {
        let (worker, action, times) = parse_rejection(spec)?;
        let policy = humans.policies.entry(worker).or_insert_with(|| Policy::Scripted {
            rejections: Default::default(),
        });
        if let Policy::Scripted { rejections } = policy {
            rejections.insert(action, times);
        }
    }
    let manager = RunManager::new(None);
    let options = RunOptions {
        mode: RunMode::Simulated,
        pacing: Some(Pacing::Manual),
        humans,
        config: Some(config),
        ..RunOptions::default()
    };
    let handle = manager.start(&job, &options).map_err(|e| e.to_string())?;
    while !handle.step() {}
    let snapshot = handle.snapshot();
    let log = handle.log_text();
    let summary = replay_text(&log).map_err(|e| e.to_string())?;
    if let Some(path) = &args.trace {
        write(path, &summary.trace.to_csv())?;
    }
    if let Some(path) = &args.log {
        write(path, &log)?;
    }
    let out = json!({
        "job": snapshot.job,
        "variant": snapshot.variant,
        "status": snapshot.status,
        "error": snapshot.error,
        "makespan": snapshot.makespan,
        "actions": snapshot.actions.len(),
        "completed": summary.allocation.len(),
        "allocation": summary.allocation,
        "rejections": summary.rejections,
        "solves": snapshot.solver.solves,
        "solver_ms": snapshot.solver.total_ms,
        "trace": args.trace,
        "log": args.log,
    });
    emit(&format!("{out}\n"))?;
    Ok(snapshot.status == RunStatus::Success)
}

fn bench(args: BenchArgs) -> Result<bool, String> {
    let spec = BenchmarkSpec {
        topology: args.topology,
        actions: parse_counts(&args.actions)?,
        agents: parse_counts(&args.agents)?,
        variant: args.variant,
        repetitions: args.reps,
        seed: args.seed,
    };
    let exec = if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let rows = run_benchmark(&spec, exec)?;
    let mut text = format!("{}\n", BenchmarkRow::CSV_HEADER);
    for row in rows {
        text.push_str(&row.to_csv());
        text.push('\n');
    }
    emit(&text)?;
    Ok(true)
}

fn serve(args: ServeArgs) -> Result<bool, String> {
    let job = Arc::new(load(&args.job)?);
    if let Some(dir) = &args.log_dir {
        std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    }
    if args.time_scale.is_some_and(|s| !(s > 0.0)) {
        return Err("--time-scale must be positive".into());
    }
    let defaults = RunOptions {
        mode: args.mode,
        pacing: args.time_scale.map(|scale| Pacing::RealTime { scale }),
        soft_timeout: args.soft_timeout,
        ..RunOptions::default()
    };
    let manager = Arc::new(RunManager::new(args.log_dir.clone()));
    if args.start {
        manager.start(&job, &defaults).map_err(|e| e.to_string())?;
    }
    let state = AppState {
        manager: manager.clone(),
        default_job: Some(job),
        defaults,
    };
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(SocketAddr::new(args.host, args.port))
            .await
            .map_err(|e| format!("cannot listen on {}:{}: {e}", args.host, args.port))?;
        let addr = listener.local_addr().map_err(|e| e.to_string())?;
        println!("{}", json!({ "listening": addr.to_string() }));
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        api::serve(listener, state, shutdown).await.map_err(|e| e.to_string())
    })?;
    manager.stop_all();
    Ok(true)
}

fn replay(path: &Path) -> Result<bool, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let summary = replay_text(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    emit(&format!("{}\n", serde_json::to_string(&summary).expect("summaries serialize")))?;
    Ok(summary.faults.is_empty())
}

/// Writes to stdout; a reader that went away is not an error.
fn emit(text: &str) -> Result<(), String> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(format!("cannot write output: {e}")),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default_level = if matches!(cli.command, Command::Serve(_)) { "info" } else { "warn" };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default_level)),
        )
        .with_writer(std::io::stderr)
        .init();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Bench(args) => bench(args),
        Command::Serve(args) => serve(args),
        Command::Replay { log } => replay(&log),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_forms() {
        assert_eq!(parse_counts("10..30:10").unwrap(), [10, 20, 30]);
        assert_eq!(parse_counts("2..4").unwrap(), [2, 3, 4]);
        assert_eq!(parse_counts("5, 7").unwrap(), [5, 7]);
        assert_eq!(parse_counts("9").unwrap(), [9]);
        assert!(parse_counts("4..2").is_err());
        assert!(parse_counts("1..5:0").is_err());
        assert!(parse_counts("x").is_err());
    }

    #[test]
    fn rejection_forms() {
        assert_eq!(parse_rejection("h:a6").unwrap(), ("h".into(), "a6".into(), 1));
        assert_eq!(parse_rejection("h:a6:3").unwrap(), ("h".into(), "a6".into(), 3));
        assert!(parse_rejection("h").is_err());
    }
}
