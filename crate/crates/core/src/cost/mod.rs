//! Cost terms of the allocation objective: base suitability (duration or
//! distance-augmented), availability, and negotiation preference.

mod availability;
mod distance;
mod preference;

pub use availability::{availability_cost, collaborative_availability, AvailabilityMode, BusyState};
pub use distance::{distance_cost, norm, DistanceGains, DistanceRole, Vec3};
pub use preference::{NegotiationCounts, Outcome, PreferenceLedger};

use serde::{Deserialize, Serialize};

use crate::alloc::{AllocError, AllocationProblem, CandidateId, Mode};
use crate::plan::{Job, WorkerKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CostError {
    #[error("candidate `{0}` has no feasible action; its gains are undefined")]
    NoFeasibleActions(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMetric {
    /// Execution time of the action.
    #[default]
    Duration,
    /// Initial cost plus human-robot distance terms.
    Distance,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostConfig {
    pub metric: CostMetric,
    pub availability: AvailabilityMode,
    pub distance: DistanceGains,
}

/// Largest feasible cost of each row, used as both the availability and the
/// preference gain so the three cost terms share one range.
pub fn calibrate_gains(names: &[&str], table: &[Vec<Option<f64>>]) -> Result<Vec<f64>, CostError> {
    table
        .iter()
        .zip(names)
        .map(|(row, name)| {
            row.iter()
                .flatten()
                .copied()
                .reduce(f64::max)
                .ok_or_else(|| CostError::NoFeasibleActions(name.to_string()))
        })
        .collect()
}

/// Latest known positions of workers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Positions {
    pub workers: Vec<Option<Vec3>>,
    /// Time of the last update per worker, seconds.
    pub updated: Vec<Option<f64>>,
}

impl Positions {
    pub fn set(&mut self, agent: usize, position: Vec3, now: f64) {
        self.workers[agent] = Some(position);
        self.updated[agent] = Some(now);
    }

    /// Whether the last update is older than `horizon`. Stale positions are
    /// still used as the last known value.
    pub fn is_stale(&self, agent: usize, now: f64, horizon: f64) -> bool {
        self.updated[agent].map_or(true, |t| now - t > horizon)
    }
}

#[derive(Debug, Clone)]
pub struct CostModel {
    pub config: CostConfig,
    /// `α` per base worker.
    pub alpha: Vec<f64>,
    /// `Ψ` per candidate.
    pub psi: Vec<f64>,
    pub ledger: PreferenceLedger,
    pub positions: Positions,
}

impl CostModel {
    /// Calibrates gains on the job's base table for the configured metric.
    pub fn new(job: &Job, config: CostConfig) -> Result<Self, CostError> {
        let table = match config.metric {
            CostMetric::Duration => &job.durations,
            CostMetric::Distance => &job.c_init,
        };
        let singles: Vec<CandidateId> = (0..job.candidates.base_count())
            .map(|agent| job.candidates.single(agent).expect("singles always exist"))
            .collect();
        let names: Vec<&str> = singles.iter().map(|&c| job.candidates.get(c).name.as_str()).collect();
        let rows: Vec<Vec<Option<f64>>> = singles.iter().map(|c| table[c.0].clone()).collect();
        let alpha = calibrate_gains(&names, &rows)?;
        // Combinations that can do nothing are never allocated; their gain is moot.
        let psi = table
            .iter()
            .map(|row| row.iter().flatten().copied().reduce(f64::max).unwrap_or(0.0))
            .collect();
        let n = job.plan.workers.len();
        let positions = Positions {
            workers: job.plan.workers.iter().map(|w| w.position).collect(),
            updated: vec![None; n],
        };
        Ok(CostModel {
            config,
            alpha,
            psi,
            ledger: PreferenceLedger::new(),
            positions,
        })
    }

    /// `ξ` of a base worker.
    pub fn worker_availability(&self, agent: usize, busy: Option<BusyState>) -> f64 {
        availability_cost(self.alpha[agent], busy, self.config.availability)
    }

    /// Base suitability cost, or `None` if the candidate cannot perform the
    /// action.
    pub fn base_cost(&self, job: &Job, candidate: CandidateId, action: usize) -> Option<f64> {
        match self.config.metric {
            CostMetric::Duration => job.durations[candidate.0][action],
            CostMetric::Distance => {
                let c_init = job.c_init[candidate.0][action]?;
                Some(distance_cost(c_init, self.distance_role(job, candidate, action), self.config.distance))
            }
        }
    }

    fn distance_role(&self, job: &Job, candidate: CandidateId, action: usize) -> DistanceRole {
        let members = &job.candidates.get(candidate).members;
        let humans: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&m| job.worker_kind(m) == WorkerKind::Human)
            .collect();
        let robots: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&m| job.worker_kind(m) == WorkerKind::Robot)
            .collect();
        match (humans.as_slice(), robots.as_slice()) {
            ([], [_]) => {
                // Distance from the nearest positioned human in the team.
                let Some(target) = job.plan.actions[action].position else {
                    return DistanceRole::Human;
                };
                let nearest = (0..job.plan.workers.len())
                    .filter(|&w| job.worker_kind(w) == WorkerKind::Human)
                    .filter_map(|w| self.positions.workers[w])
                    .map(|p| norm(p, target))
                    .reduce(f64::min);
                match nearest {
                    Some(d) => DistanceRole::Robot { human_to_action: d },
                    None => DistanceRole::Human,
                }
            }
            ([h], [r]) => match (self.positions.workers[*h], self.positions.workers[*r]) {
                (Some(ph), Some(pr)) => DistanceRole::Collaboration {
                    human_to_robot: norm(ph, pr),
                },
                _ => DistanceRole::Human,
            },
            _ => DistanceRole::Human,
        }
    }

    /// Assembles the allocation program over `actions` (job indices) given
    /// each base worker's `ξ`.
    pub fn problem(
        &self,
        job: &Job,
        mode: Mode,
        actions: &[usize],
        xi: &[f64],
    ) -> Result<AllocationProblem, AllocError> {
        let cost: Vec<Vec<Option<f64>>> = job
            .candidates
            .iter()
            .map(|c| actions.iter().map(|&a| self.base_cost(job, c.id, a)).collect())
            .collect();
        let availability: Vec<f64> = job
            .candidates
            .iter()
            .map(|c| {
                let members: Vec<f64> = c.members.iter().map(|&m| xi[m]).collect();
                collaborative_availability(&members)
            })
            .collect();
        let preference: Vec<Vec<f64>> = job
            .candidates
            .iter()
            .map(|c| {
                actions
                    .iter()
                    .map(|&a| self.ledger.cost(c.id, a, self.psi[c.id.0]))
                    .collect()
            })
            .collect();
        let names = actions.iter().map(|&a| job.action_id(a).to_string()).collect();
        let problem = match mode {
            Mode::Cooperative => {
                AllocationProblem::cooperative(job.candidates.clone(), names, cost, availability)?
                    .with_preference(preference)?
            }
            Mode::Collaborative => AllocationProblem::collaborative(
                job.candidates.clone(),
                names,
                cost,
                preference,
                availability,
            )?,
        };
        Ok(problem)
    }
}
