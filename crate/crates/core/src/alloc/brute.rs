use std::cmp::Ordering;
use std::time::Instant;

use super::{infeasibility, AllocError, AllocationProblem, AllocationSolution, CandidateId, SolveStats};
use crate::par::{self, Execution};

/// Upper bound on the number of per-action choice combinations enumerated.
pub const BRUTE_FORCE_LIMIT: f64 = 1e7;

/// Exhaustive enumeration of every feasible assignment.
pub fn brute_force_solve(problem: &AllocationProblem) -> Result<AllocationSolution, AllocError> {
    brute_force_solve_with(problem, Execution::default())
}

pub fn brute_force_solve_with(
    problem: &AllocationProblem,
    exec: Execution,
) -> Result<AllocationSolution, AllocError> {
    problem.validate()?;
    let started = Instant::now();
    let l = problem.actions.len();
    if l == 0 {
        return Ok(AllocationSolution::empty());
    }
    // choices[a]: candidates able to perform action a.
    let choices: Vec<Vec<usize>> = (0..l)
        .map(|a| {
            (0..problem.candidates.len())
                .filter(|&c| problem.cost[c][a].is_some())
                .collect()
        })
        .collect();
    let space: f64 = choices.iter().map(|c| (c.len() + 1) as f64).product();
    if space > BRUTE_FORCE_LIMIT {
        return Err(AllocError::TooLarge {
            space,
            limit: BRUTE_FORCE_LIMIT,
        });
    }

    let search = Search { problem, choices: &choices };
    // Split on the first action's choice: `None` plus each candidate.
    let first: Vec<Option<usize>> = std::iter::once(None)
        .chain(choices[0].iter().copied().map(Some))
        .collect();
    let results = par::map(exec, &first, |&choice| {
        let mut state = State::new(problem.base_count());
        let mut best = None;
        if state.apply(problem, choice, 0) {
            search.descend(1, &mut state, &mut best);
        }
        best
    });
    let best = results
        .into_iter()
        .flatten()
        .min_by(|x: &Leaf, y: &Leaf| x.cmp_key(y));
    let leaf = best.ok_or_else(|| infeasibility(problem))?;
    Ok(AllocationSolution {
        objective: leaf.objective,
        assignment: leaf.pairs.into_iter().map(|(c, a)| (CandidateId(c), a)).collect(),
        solve_time: started.elapsed(),
        stats: SolveStats {
            lp_solves: 0,
            nodes: space as usize,
        },
    })
}

struct Search<'a> {
    problem: &'a AllocationProblem,
    choices: &'a [Vec<usize>],
}

struct State {
    used: Vec<bool>,
    pairs: Vec<(usize, usize)>,
    count: usize,
}

impl State {
    fn new(n: usize) -> Self {
        State {
            used: vec![false; n],
            pairs: Vec::new(),
            count: 0,
        }
    }

    /// Adds `choice` for `action` if its members are still free.
    fn apply(&mut self, problem: &AllocationProblem, choice: Option<usize>, action: usize) -> bool {
        let Some(c) = choice else { return true };
        let cand = problem.candidates.get(CandidateId(c));
        if cand.members.iter().any(|&m| self.used[m]) {
            return false;
        }
        for &m in &cand.members {
            self.used[m] = true;
        }
        self.pairs.push((c, action));
        self.count += problem.theta_of(cand);
        true
    }

    fn undo(&mut self, problem: &AllocationProblem, choice: Option<usize>) {
        let Some(c) = choice else { return };
        let cand = problem.candidates.get(CandidateId(c));
        for &m in &cand.members {
            self.used[m] = false;
        }
        self.pairs.pop();
        self.count -= problem.theta_of(cand);
    }
}

struct Leaf {
    objective: f64,
    members: usize,
    /// Sorted by candidate, then action.
    pairs: Vec<(usize, usize)>,
}

impl Leaf {
    fn cmp_key(&self, other: &Leaf) -> Ordering {
        let tol = 1e-9 * self.objective.abs().max(other.objective.abs()).max(1.0);
        if self.objective < other.objective - tol {
            return Ordering::Less;
        }
        if self.objective > other.objective + tol {
            return Ordering::Greater;
        }
        self.members
            .cmp(&other.members)
            .then_with(|| self.pairs.cmp(&other.pairs))
    }
}

impl Search<'_> {
    fn descend(&self, action: usize, state: &mut State, best: &mut Option<Leaf>) {
        let target = self.problem.target_count();
        if state.count > target {
            return;
        }
        if action == self.choices.len() {
            if state.count == target && self.within_budgets(&state.pairs) {
                let leaf = self.leaf(&state.pairs);
                if best.as_ref().map_or(true, |b| leaf.cmp_key(b) == Ordering::Less) {
                    *best = Some(leaf);
                }
            }
            return;
        }
        let options = std::iter::once(None).chain(self.choices[action].iter().copied().map(Some));
        for choice in options {
            if state.apply(self.problem, choice, action) {
                self.descend(action + 1, state, best);
                state.undo(self.problem, choice);
            }
        }
    }

    fn within_budgets(&self, pairs: &[(usize, usize)]) -> bool {
        self.problem.budgets.iter().all(|b| {
            let used: f64 = pairs.iter().map(|&(c, a)| b.usage[c][a]).sum();
            used <= b.limit + 1e-9 * b.limit.abs().max(1.0)
        })
    }

    fn leaf(&self, pairs: &[(usize, usize)]) -> Leaf {
        let mut pairs = pairs.to_vec();
        pairs.sort_unstable();
        let objective = pairs
            .iter()
            .map(|&(c, a)| self.problem.coefficient(CandidateId(c), a).unwrap())
            .sum();
        let members = pairs
            .iter()
            .map(|&(c, _)| self.problem.candidates.get(CandidateId(c)).size())
            .sum();
        Leaf {
            objective,
            members,
            pairs,
        }
    }
}
