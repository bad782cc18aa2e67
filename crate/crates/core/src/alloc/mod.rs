//! Role allocation as a binary program over single workers and worker
//! combinations.
//!
//! [`solve`] is an exact branch-and-bound over an LP relaxation;
//! [`brute_force_solve`] enumerates every feasible assignment and serves as
//! the test oracle. Both return the same optimum under the same tie-break:
//! lowest objective, then fewest members, then the lexicographically
//! smallest sorted list of `(candidate, action)` pairs.

mod brute;
mod candidate;
mod check;
pub mod lp;
mod problem;
mod solver;

pub use brute::{brute_force_solve, brute_force_solve_with, BRUTE_FORCE_LIMIT};
pub use candidate::{Candidate, CandidateId, CandidateSet};
pub use check::{check_solution, Violation};
pub use problem::{theta, AllocationProblem, CountRule, AllocationSolution, Budget, Mode, SolveStats};
pub use solver::solve;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AllocError {
    #[error("invalid allocation problem: {0}")]
    InvalidProblem(String),
    #[error("infeasible allocation: {reason}")]
    Infeasible {
        reason: String,
        /// Actions that no candidate can perform.
        actions: Vec<String>,
    },
    #[error("problem too large for exhaustive enumeration ({space} > {limit} assignments)")]
    TooLarge { space: f64, limit: f64 },
}

/// Describes why a problem has no feasible assignment.
pub(crate) fn infeasibility(problem: &AllocationProblem) -> AllocError {
    let actions: Vec<String> = problem
        .actions
        .iter()
        .enumerate()
        .filter(|&(a, _)| problem.cost.iter().all(|row| row[a].is_none()))
        .map(|(_, name)| name.clone())
        .collect();
    let target = problem.target_count();
    let reason = if actions.is_empty() {
        let budgets = if problem.budgets.is_empty() {
            ""
        } else {
            " within the budget limits"
        };
        format!("cannot make exactly {target} allocations with disjoint agents{budgets}")
    } else {
        format!(
            "no candidate can perform {}; {target} allocations required",
            actions.join(", ")
        )
    };
    AllocError::Infeasible { reason, actions }
}

/// Absolute tolerance used when comparing objective values.
pub(crate) fn objective_tol(value: f64) -> f64 {
    1e-9 * value.abs().max(1.0)
}
