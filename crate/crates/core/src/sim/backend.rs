use std::collections::{BTreeMap, BTreeSet};

use crate::nodes::{ExecutionBackend, PrimitiveCommand, PrimitiveStatus};

const TIME_TOL: f64 = 1e-9;

/// Simulated robot controller. Each primitive takes an equal share of the
/// action's nominal duration, so the action ends exactly on time.
#[derive(Debug, Default)]
pub struct SimBackend {
    instantaneous: bool,
    /// `(action, primitive index)` pairs that fault.
    faults: BTreeSet<(usize, usize)>,
    next: u64,
    running: BTreeMap<u64, (f64, bool)>,
}

impl SimBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every primitive completes on the tick it starts.
    pub fn instantaneous() -> Self {
        SimBackend {
            instantaneous: true,
            ..Self::default()
        }
    }

    pub fn with_fault(mut self, action: usize, primitive: usize) -> Self {
        self.faults.insert((action, primitive));
        self
    }
}

impl ExecutionBackend for SimBackend {
    fn start(&mut self, command: &PrimitiveCommand<'_>, now: f64) -> Result<u64, String> {
        let end = if self.instantaneous {
            now
        } else {
            let share = (command.index + 1) as f64 / command.count as f64;
            command.action_start + command.nominal * share
        };
        let fault = self.faults.contains(&(command.action, command.index));
        self.next += 1;
        self.running.insert(self.next, (end, fault));
        Ok(self.next)
    }

    fn poll(&mut self, handle: u64, now: f64) -> PrimitiveStatus {
        let Some(&(end, fault)) = self.running.get(&handle) else {
            return PrimitiveStatus::Fault(format!("unknown primitive handle {handle}"));
        };
        if fault {
            self.running.remove(&handle);
            return PrimitiveStatus::Fault("simulated fault".into());
        }
        if now + TIME_TOL >= end {
            self.running.remove(&handle);
            PrimitiveStatus::Done
        } else {
            PrimitiveStatus::Running
        }
    }
}
