use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::alloc::CandidateId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegotiationCounts {
    pub negations: u32,
    pub negotiations: u32,
}

impl NegotiationCounts {
    /// `ψ = Ψ · negations / negotiations`, zero without history.
    pub fn cost(self, gain: f64) -> f64 {
        if self.negotiations == 0 {
            return 0.0;
        }
        gain * self.negations as f64 / self.negotiations as f64
    }
}

/// Negotiation history per `(candidate, action)`. Combinations keep their own
/// entries, separate from their members'.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PreferenceLedger {
    entries: BTreeMap<(CandidateId, usize), NegotiationCounts>,
}

impl PreferenceLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, candidate: CandidateId, action: usize, outcome: Outcome) -> NegotiationCounts {
        let entry = self.entries.entry((candidate, action)).or_default();
        entry.negotiations += 1;
        if outcome == Outcome::Rejected {
            entry.negations += 1;
        }
        *entry
    }

    pub fn counts(&self, candidate: CandidateId, action: usize) -> NegotiationCounts {
        self.entries
            .get(&(candidate, action))
            .copied()
            .unwrap_or_default()
    }

    pub fn cost(&self, candidate: CandidateId, action: usize, gain: f64) -> f64 {
        self.counts(candidate, action).cost(gain)
    }

    pub fn iter(&self) -> impl Iterator<Item = (CandidateId, usize, NegotiationCounts)> + '_ {
        self.entries.iter().map(|(&(c, a), &n)| (c, a, n))
    }
}
