use std::fmt;

use super::{theta, AllocationProblem, AllocationSolution, CandidateId};

/// A constraint broken by a proposed assignment.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    UnknownCandidate(usize),
    UnknownAction(usize),
    Duplicate { candidate: usize, action: usize },
    /// The pair is masked out (no cost for it).
    Infeasible { candidate: usize, action: usize },
    ActionCap { action: usize, assigned: usize },
    AgentCap { agent: usize, assigned: usize },
    Count { expected: usize, found: usize },
    Budget { index: usize, used: f64, limit: f64 },
    Objective { reported: f64, recomputed: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownCandidate(c) => write!(f, "unknown candidate {c}"),
            Violation::UnknownAction(a) => write!(f, "unknown action {a}"),
            Violation::Duplicate { candidate, action } => {
                write!(f, "pair ({candidate}, {action}) assigned twice")
            }
            Violation::Infeasible { candidate, action } => {
                write!(f, "candidate {candidate} cannot perform action {action}")
            }
            Violation::ActionCap { action, assigned } => {
                write!(f, "action {action} assigned {assigned} times")
            }
            Violation::AgentCap { agent, assigned } => {
                write!(f, "agent {agent} used {assigned} times")
            }
            Violation::Count { expected, found } => {
                write!(f, "allocation count {found}, expected {expected}")
            }
            Violation::Budget { index, used, limit } => {
                write!(f, "budget {index} uses {used} of {limit}")
            }
            Violation::Objective {
                reported,
                recomputed,
            } => write!(f, "objective {reported} but assignment costs {recomputed}"),
        }
    }
}

/// Re-derives every constraint from the raw problem data, without reusing
/// the solver's model. Returns all violations found.
pub fn check_solution(problem: &AllocationProblem, solution: &AllocationSolution) -> Vec<Violation> {
    let mut out = Vec::new();
    let p = problem.candidates.len();
    let l = problem.actions.len();
    let n = problem.candidates.base_count();
    let mut per_action = vec![0usize; l];
    let mut per_agent = vec![0usize; n];
    let mut seen = std::collections::HashSet::new();
    let mut count = 0usize;
    let mut objective = 0.0;
    for &(CandidateId(c), a) in &solution.assignment {
        if c >= p {
            out.push(Violation::UnknownCandidate(c));
            continue;
        }
        if a >= l {
            out.push(Violation::UnknownAction(a));
            continue;
        }
        if !seen.insert((c, a)) {
            out.push(Violation::Duplicate {
                candidate: c,
                action: a,
            });
        }
        let Some(cost) = problem.cost[c][a] else {
            out.push(Violation::Infeasible {
                candidate: c,
                action: a,
            });
            continue;
        };
        objective += cost + problem.preference[c][a] + problem.availability[c];
        per_action[a] += 1;
        let cand = problem.candidates.get(CandidateId(c));
        for (agent, &e) in cand.eta.iter().enumerate() {
            per_agent[agent] += e as usize;
        }
        let members = cand.eta.iter().filter(|&&e| e == 1).count();
        count += theta(members, l, n, problem.count_rule);
    }
    for (a, &k) in per_action.iter().enumerate() {
        if k > 1 {
            out.push(Violation::ActionCap {
                action: a,
                assigned: k,
            });
        }
    }
    for (agent, &k) in per_agent.iter().enumerate() {
        if k > 1 {
            out.push(Violation::AgentCap {
                agent,
                assigned: k,
            });
        }
    }
    let expected = l.min(n);
    if count != expected {
        out.push(Violation::Count {
            expected,
            found: count,
        });
    }
    for (index, b) in problem.budgets.iter().enumerate() {
        let used: f64 = solution
            .assignment
            .iter()
            .filter(|&&(CandidateId(c), a)| c < p && a < l)
            .map(|&(CandidateId(c), a)| b.usage[c][a])
            .sum();
        if used > b.limit + 1e-9 * b.limit.abs().max(1.0) {
            out.push(Violation::Budget {
                index,
                used,
                limit: b.limit,
            });
        }
    }
    if (objective - solution.objective).abs() > 1e-6 * objective.abs().max(1.0) {
        out.push(Violation::Objective {
            reported: solution.objective,
            recomputed: objective,
        });
    }
    out
}
