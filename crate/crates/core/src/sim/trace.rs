use std::collections::HashMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::nodes::{EventKind, RunEvent};
use crate::plan::{Group, Job, PlanNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceOutcome {
    Completed,
    Rejected,
}

impl TraceOutcome {
    fn as_str(self) -> &'static str {
        match self {
            TraceOutcome::Completed => "completed",
            TraceOutcome::Rejected => "rejected",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub candidate: String,
    pub action: String,
    pub start: f64,
    pub end: f64,
    pub outcome: TraceOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub worker: String,
    pub action: String,
    pub time: f64,
}

/// What every worker did and when, rebuilt from a run's events.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub entries: Vec<TraceEntry>,
    pub rejections: Vec<Rejection>,
}

impl ExecutionTrace {
    /// Completed entries come from finished actions; rejected entries span
    /// from the offer to the refusal.
    pub fn from_events(events: &[RunEvent]) -> Self {
        let mut trace = ExecutionTrace::default();
        let mut offered: HashMap<String, f64> = HashMap::new();
        for event in events {
            match &event.kind {
                EventKind::RequestSent { action, .. } => {
                    offered.entry(action.clone()).or_insert(event.time);
                }
                EventKind::RequestRejected {
                    worker,
                    action,
                    candidate,
                    ..
                } => {
                    let start = offered.remove(action).unwrap_or(event.time);
                    trace.entries.push(TraceEntry {
                        candidate: candidate.clone(),
                        action: action.clone(),
                        start,
                        end: event.time,
                        outcome: TraceOutcome::Rejected,
                    });
                    trace.rejections.push(Rejection {
                        worker: worker.clone(),
                        action: action.clone(),
                        time: event.time,
                    });
                }
                EventKind::ActionStarted { action, .. } => {
                    offered.remove(action);
                }
                EventKind::ActionFinished {
                    action,
                    candidate,
                    start,
                } => trace.entries.push(TraceEntry {
                    candidate: candidate.clone(),
                    action: action.clone(),
                    start: *start,
                    end: event.time,
                    outcome: TraceOutcome::Completed,
                }),
                _ => {}
            }
        }
        trace
    }

    pub fn completed(&self) -> impl Iterator<Item = &TraceEntry> {
        self.entries
            .iter()
            .filter(|e| e.outcome == TraceOutcome::Completed)
    }

    /// Latest end time; zero for an empty trace.
    pub fn makespan(&self) -> f64 {
        self.entries.iter().map(|e| e.end).fold(0.0, f64::max)
    }

    pub fn candidate_for(&self, action: &str) -> Option<&str> {
        self.completed()
            .find(|e| e.action == action)
            .map(|e| e.candidate.as_str())
    }

    /// `worker,action,start,end,outcome`, one record per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{:.3},{:.3},{}",
                e.candidate,
                e.action,
                e.start,
                e.end,
                e.outcome.as_str()
            )
            .expect("writing to a string");
        }
        out
    }

    /// One row per entry and member worker, with a header, ready to plot as
    /// horizontal bars.
    pub fn gantt_table(&self) -> String {
        let mut out = String::from("worker,candidate,action,start,duration,outcome\n");
        for e in &self.entries {
            for worker in e.candidate.split('+') {
                writeln!(
                    out,
                    "{worker},{},{},{:.3},{:.3},{}",
                    e.candidate,
                    e.action,
                    e.start,
                    e.end - e.start,
                    e.outcome.as_str()
                )
                .expect("writing to a string");
            }
        }
        out
    }

    /// Pairs of completed entries that share a worker and overlap in time.
    pub fn overlaps(&self) -> Vec<(&TraceEntry, &TraceEntry)> {
        let entries: Vec<&TraceEntry> = self.completed().collect();
        let mut out = Vec::new();
        for (i, a) in entries.iter().enumerate() {
            for b in &entries[i + 1..] {
                let shared = a.candidate.split('+').any(|w| b.candidate.split('+').any(|v| v == w));
                if shared && a.start < b.end - TOL && b.start < a.end - TOL {
                    out.push((*a, *b));
                }
            }
        }
        out
    }

    /// Sequence-order violations: an action that started before a
    /// predecessor in its sequence ended.
    pub fn precedence_violations(&self, job: &Job) -> Vec<String> {
        let span: HashMap<&str, (f64, f64)> = self
            .completed()
            .map(|e| (e.action.as_str(), (e.start, e.end)))
            .collect();
        let mut out = Vec::new();
        check_order(&job.plan.structure, &span, &mut out);
        out
    }

    /// Completed entries whose length differs from the job's duration.
    pub fn duration_mismatches(&self, job: &Job) -> Vec<String> {
        self.completed()
            .filter_map(|e| {
                let a = job.action_index(&e.action)?;
                let c = job.candidates.by_name(&e.candidate)?;
                let expected = job.duration(c, a)?;
                ((e.end - e.start - expected).abs() > 1e-6).then(|| {
                    format!(
                        "{} on {} took {:.3} s, expected {expected}",
                        e.candidate,
                        e.action,
                        e.end - e.start
                    )
                })
            })
            .collect()
    }
}

const TOL: f64 = 1e-9;

/// Returns the interval covered by `node` and records ordering violations.
fn check_order(node: &PlanNode, span: &HashMap<&str, (f64, f64)>, out: &mut Vec<String>) -> Option<(f64, f64)> {
    match node {
        PlanNode::Action(id) => span.get(id.as_str()).copied(),
        PlanNode::Group(Group::Parallel(children)) => children
            .iter()
            .filter_map(|c| check_order(c, span, out))
            .reduce(|a, b| (a.0.min(b.0), a.1.max(b.1))),
        PlanNode::Group(Group::Sequence(children)) => {
            let mut covered: Option<(f64, f64)> = None;
            for child in children {
                let Some(s) = check_order(child, span, out) else {
                    continue;
                };
                if let Some(prev) = covered {
                    if s.0 < prev.1 - TOL {
                        out.push(format!(
                            "{:?} started at {:.3} before its predecessor ended at {:.3}",
                            child.action_ids(),
                            s.0,
                            prev.1
                        ));
                    }
                }
                covered = Some(covered.map_or(s, |p| (p.0.min(s.0), p.1.max(s.1))));
            }
            covered
        }
    }
}
