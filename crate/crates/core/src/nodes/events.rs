use serde::{Deserialize, Serialize};

use super::Variant;
use crate::bt::NodeStatus;

/// Something that happened during a run, as recorded in the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    RunStarted {
        job: String,
        variant: Variant,
        workers: Vec<String>,
        actions: Vec<String>,
    },
    ActionRegistered {
        action: String,
    },
    /// A solve whose assignment differs from the previous one.
    Allocated {
        actions: Vec<String>,
        /// `[candidate, action]` pairs.
        assignment: Vec<[String; 2]>,
        objective: f64,
        solve_us: u64,
    },
    RequestSent {
        request: u64,
        worker: String,
        action: String,
        candidate: String,
        collaborative: bool,
    },
    RequestAccepted {
        request: u64,
        worker: String,
        action: String,
    },
    RequestRejected {
        request: u64,
        worker: String,
        action: String,
        candidate: String,
        negations: u32,
        negotiations: u32,
        /// Preference cost of `(candidate, action)` after the update.
        preference: f64,
    },
    CompletionQuery {
        request: u64,
        worker: String,
        action: String,
    },
    ActionStarted {
        action: String,
        candidate: String,
    },
    ActionFinished {
        action: String,
        candidate: String,
        start: f64,
    },
    PositionUpdated {
        worker: String,
        position: [f64; 3],
    },
    Alert {
        message: String,
    },
    Fault {
        message: String,
    },
    RunFinished {
        status: NodeStatus,
        makespan: f64,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::RunStarted { .. } => "run_started",
            EventKind::ActionRegistered { .. } => "action_registered",
            EventKind::Allocated { .. } => "allocated",
            EventKind::RequestSent { .. } => "request_sent",
            EventKind::RequestAccepted { .. } => "request_accepted",
            EventKind::RequestRejected { .. } => "request_rejected",
            EventKind::CompletionQuery { .. } => "completion_query",
            EventKind::ActionStarted { .. } => "action_started",
            EventKind::ActionFinished { .. } => "action_finished",
            EventKind::PositionUpdated { .. } => "position_updated",
            EventKind::Alert { .. } => "alert",
            EventKind::Fault { .. } => "fault",
            EventKind::RunFinished { .. } => "run_finished",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEvent {
    pub seq: u64,
    /// Run time in seconds.
    pub time: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("event log line {line}: {message}")]
pub struct LogParseError {
    pub line: usize,
    pub message: String,
}

impl RunEvent {
    /// `seq,timestamp,kind,payload` with a JSON object payload.
    pub fn to_log_line(&self) -> String {
        let mut payload = serde_json::to_value(&self.kind).expect("events serialize");
        if let Some(obj) = payload.as_object_mut() {
            obj.remove("kind");
        }
        format!("{},{},{},{}", self.seq, self.time, self.kind.name(), payload)
    }

    pub fn from_log_line(line: &str, number: usize) -> Result<Self, LogParseError> {
        let err = |message: String| LogParseError { line: number, message };
        let mut parts = line.splitn(4, ',');
        let (Some(seq), Some(time), Some(kind), Some(payload)) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(err("expected `seq,timestamp,kind,payload`".into()));
        };
        let seq = seq.parse().map_err(|e| err(format!("bad seq: {e}")))?;
        let time = time.parse().map_err(|e| err(format!("bad timestamp: {e}")))?;
        let mut value: serde_json::Value =
            serde_json::from_str(payload).map_err(|e| err(format!("bad payload: {e}")))?;
        let obj = value
            .as_object_mut()
            .ok_or_else(|| err("payload must be a JSON object".into()))?;
        obj.insert("kind".into(), serde_json::Value::String(kind.to_string()));
        let kind = serde_json::from_value(value).map_err(|e| err(format!("bad event: {e}")))?;
        Ok(RunEvent { seq, time, kind })
    }
}

/// Parses a whole log, checking that sequence numbers strictly increase.
pub fn parse_log(text: &str) -> Result<Vec<RunEvent>, LogParseError> {
    let mut out: Vec<RunEvent> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let event = RunEvent::from_log_line(line, i + 1)?;
        if let Some(prev) = out.last() {
            if event.seq <= prev.seq || event.time < prev.time {
                return Err(LogParseError {
                    line: i + 1,
                    message: "events out of order".into(),
                });
            }
        }
        out.push(event);
    }
    Ok(out)
}
