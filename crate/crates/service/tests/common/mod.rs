#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use teamalloc::nodes::{EventKind, RunEvent};
use teamalloc_service::document::{load_job_file, LoadedJob};
use teamalloc_service::manager::RunHandle;
use teamalloc_service::session::{Decision, RequestKind};

pub fn job_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../jobs").join(name)
}

pub fn job(name: &str) -> LoadedJob {
    load_job_file(&job_path(name)).unwrap()
}

/// Answers console requests the way simulated humans would: offers after
/// `delay` seconds, completions once the nominal duration is up.
pub struct ScriptedConsole {
    pub delay: f64,
    /// Remaining rejections per `(worker, action)`.
    pub rejections: BTreeMap<(String, String), u32>,
}

impl ScriptedConsole {
    pub fn new(delay: f64) -> Self {
        ScriptedConsole {
            delay,
            rejections: BTreeMap::new(),
        }
    }

    pub fn reject(mut self, worker: &str, action: &str, times: u32) -> Self {
        self.rejections.insert((worker.into(), action.into()), times);
        self
    }

    /// Answers everything that is due at the run's next tick.
    pub fn answer(&mut self, handle: &RunHandle) {
        let Some(session) = handle.session() else { return };
        let now = handle.with_run(|r| r.now());
        for request in session.requests() {
            if request.state != teamalloc_service::session::RequestState::Pending {
                continue;
            }
            match request.kind {
                RequestKind::Offer if now + 1e-9 >= request.sent_at + self.delay => {
                    let key = (request.worker.clone(), request.action.clone());
                    let decision = match self.rejections.get_mut(&key) {
                        Some(n) if *n > 0 => {
                            *n -= 1;
                            Decision::Reject
                        }
                        _ => Decision::Accept,
                    };
                    session.decide(&request.worker, request.request, decision).unwrap();
                }
                RequestKind::Completion
                    if now + 1e-9 >= request.started.unwrap() + request.expected_duration =>
                {
                    session.complete(&request.worker, request.request).unwrap();
                }
                _ => {}
            }
        }
    }

    /// Answers and ticks until the run ends.
    pub fn drive(&mut self, handle: &RunHandle) {
        loop {
            self.answer(handle);
            if handle.step() {
                break;
            }
        }
    }
}

/// Events with request ids and solve times cleared, for comparing runs
/// that used different gateways.
pub fn normalized(events: &[RunEvent]) -> Vec<RunEvent> {
    events
        .iter()
        .map(|e| {
            let mut e = e.clone();
            match &mut e.kind {
                EventKind::Allocated { solve_us, .. } => *solve_us = 0,
                EventKind::RequestSent { request, .. }
                | EventKind::RequestAccepted { request, .. }
                | EventKind::RequestRejected { request, .. }
                | EventKind::CompletionQuery { request, .. } => *request = 0,
                _ => {}
            }
            e
        })
        .collect()
}
