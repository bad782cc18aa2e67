//! Rebuilds a run's outcome from its event log alone.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;
use teamalloc::bt::NodeStatus;
use teamalloc::nodes::{parse_log, EventKind, LogParseError, RunEvent};
use teamalloc::sim::{ExecutionTrace, Rejection};

use crate::manager::RunStatus;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerRow {
    pub candidate: String,
    pub action: String,
    pub negations: u32,
    pub negotiations: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplaySummary {
    pub job: String,
    pub variant: String,
    pub workers: Vec<String>,
    pub events: usize,
    /// Absent when the log stops before the run finished.
    pub status: Option<RunStatus>,
    pub makespan: f64,
    /// Candidate that completed each action.
    pub allocation: BTreeMap<String, String>,
    pub rejections: Vec<Rejection>,
    pub ledger: Vec<LedgerRow>,
    pub alerts: Vec<String>,
    pub faults: Vec<String>,
    pub solves: usize,
    #[serde(skip)]
    pub trace: ExecutionTrace,
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error(transparent)]
    Parse(#[from] LogParseError),
    #[error("log does not start with run_started")]
    NoStart,
    #[error("event {seq}: {message}")]
    Inconsistent { seq: u64, message: String },
}

pub fn replay_text(text: &str) -> Result<ReplaySummary, ReplayError> {
    replay(&parse_log(text)?)
}

pub fn replay(events: &[RunEvent]) -> Result<ReplaySummary, ReplayError> {
    let Some(RunEvent {
        kind: EventKind::RunStarted { job, variant, workers, .. },
        ..
    }) = events.first()
    else {
        return Err(ReplayError::NoStart);
    };
    let mut summary = ReplaySummary {
        job: job.clone(),
        variant: variant.name().to_string(),
        workers: workers.clone(),
        events: events.len(),
        status: None,
        makespan: 0.0,
        allocation: BTreeMap::new(),
        rejections: Vec::new(),
        ledger: Vec::new(),
        alerts: Vec::new(),
        faults: Vec::new(),
        solves: 0,
        trace: ExecutionTrace::from_events(events),
    };
    let mut ledger: BTreeMap<(String, String), (u32, u32)> = BTreeMap::new();
    // Candidate currently being negotiated per action.
    let mut negotiating: HashMap<&str, &str> = HashMap::new();
    for event in events {
        match &event.kind {
            EventKind::Allocated { .. } => summary.solves += 1,
            EventKind::RequestSent { action, candidate, .. } => {
                negotiating.insert(action, candidate);
            }
            EventKind::ActionStarted { action, candidate } => {
                if negotiating.remove(action.as_str()) == Some(candidate.as_str()) {
                    ledger.entry((candidate.clone(), action.clone())).or_default().1 += 1;
                }
            }
            EventKind::RequestRejected {
                action,
                candidate,
                negations,
                negotiations,
                ..
            } => {
                negotiating.remove(action.as_str());
                let entry = ledger.entry((candidate.clone(), action.clone())).or_default();
                entry.0 += 1;
                entry.1 += 1;
                if *entry != (*negations, *negotiations) {
                    return Err(ReplayError::Inconsistent {
                        seq: event.seq,
                        message: format!(
                            "ledger for ({candidate}, {action}) is {}/{} but the event says {negations}/{negotiations}",
                            entry.0, entry.1
                        ),
                    });
                }
            }
            EventKind::ActionFinished { action, candidate, .. } => {
                summary.allocation.insert(action.clone(), candidate.clone());
            }
            EventKind::Alert { message } => summary.alerts.push(message.clone()),
            EventKind::Fault { message } => summary.faults.push(message.clone()),
            EventKind::RunFinished { status, .. } => {
                summary.status = Some(match status {
                    NodeStatus::Success => RunStatus::Success,
                    _ => RunStatus::Failure,
                })
            }
            _ => {}
        }
    }
    summary.makespan = summary.trace.makespan();
    summary.rejections = summary.trace.rejections.clone();
    summary.ledger = ledger
        .into_iter()
        .map(|((candidate, action), (negations, negotiations))| LedgerRow {
            candidate,
            action,
            negations,
            negotiations,
        })
        .collect();
    Ok(summary)
}
