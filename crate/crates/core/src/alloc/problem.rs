use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{AllocError, Candidate, CandidateId, CandidateSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Single workers only; objective `c + ξ`.
    Cooperative,
    /// Augmented candidate set with combinations; objective `c + ψ + Ξ`.
    Collaborative,
}

/// How the size of a candidate maps onto the allocation counter.
///
/// Both rules scale `k - 1` by `(min(L, N) - 1) / (N - 1)`; they differ only
/// when that ratio is a whole number.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountRule {
    /// `max(1, ⌈(k-1)(m-1)/(N-1)⌉)`, the limit of `⌊(k-1)(m-1)/(N-1+ε) + 1⌋`
    /// as `ε → 0⁺`. A pair counts once whenever `m ≤ N`, so with at least
    /// as many actions as agents every allocation covers a distinct action.
    #[default]
    Ceil,
    /// `⌊(k-1)(m-1)/(N-1)⌋ + 1`, which makes the whole team count as
    /// `min(L, N)`. A pair may then stand in for two actions.
    Floor,
}

impl std::str::FromStr for CountRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ceil" => Ok(CountRule::Ceil),
            "floor" => Ok(CountRule::Floor),
            _ => Err(format!("unknown count rule `{s}` (expected ceil or floor)")),
        }
    }
}

/// Contribution `θ` of a `members`-sized candidate to the allocation
/// counter. Singles always count 1, as does everything when `N = 1`.
pub fn theta(members: usize, actions: usize, base: usize, rule: CountRule) -> usize {
    debug_assert!(members >= 1 && members <= base.max(1));
    let target = actions.min(base);
    if base <= 1 || target == 0 {
        return 1;
    }
    let scaled = (members - 1) * (target - 1);
    match rule {
        CountRule::Ceil => scaled.div_ceil(base - 1).max(1),
        CountRule::Floor => scaled / (base - 1) + 1,
    }
}

/// Optional knapsack-style limit: `sum(usage[c][a] * x[c][a]) <= limit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub usage: Vec<Vec<f64>>,
    pub limit: f64,
}

/// One instance of the role-allocation program.
///
/// Matrices are indexed `[candidate][action]`. A `None` cost marks a pair the
/// candidate cannot perform; its variable is fixed to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationProblem {
    pub mode: Mode,
    pub candidates: CandidateSet,
    pub actions: Vec<String>,
    pub cost: Vec<Vec<Option<f64>>>,
    /// Availability cost per candidate (ξ for singles, Ξ for combinations).
    pub availability: Vec<f64>,
    /// Preference cost ψ per candidate and action.
    pub preference: Vec<Vec<f64>>,
    pub budgets: Vec<Budget>,
    #[serde(default)]
    pub count_rule: CountRule,
}

impl AllocationProblem {
    /// Cooperative program: every candidate is a single worker.
    pub fn cooperative(
        candidates: CandidateSet,
        actions: Vec<String>,
        cost: Vec<Vec<Option<f64>>>,
        availability: Vec<f64>,
    ) -> Result<Self, AllocError> {
        let preference = vec![vec![0.0; actions.len()]; candidates.len()];
        let problem = AllocationProblem {
            mode: Mode::Cooperative,
            candidates,
            actions,
            cost,
            availability,
            preference,
            budgets: Vec::new(),
            count_rule: CountRule::default(),
        };
        problem.validate()?;
        Ok(problem)
    }

    /// Collaborative program over an augmented candidate set.
    pub fn collaborative(
        candidates: CandidateSet,
        actions: Vec<String>,
        cost: Vec<Vec<Option<f64>>>,
        preference: Vec<Vec<f64>>,
        availability: Vec<f64>,
    ) -> Result<Self, AllocError> {
        let problem = AllocationProblem {
            mode: Mode::Collaborative,
            candidates,
            actions,
            cost,
            availability,
            preference,
            budgets: Vec::new(),
            count_rule: CountRule::default(),
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn with_budget(mut self, budget: Budget) -> Result<Self, AllocError> {
        self.budgets.push(budget);
        self.validate()?;
        Ok(self)
    }

    pub fn with_count_rule(mut self, rule: CountRule) -> Self {
        self.count_rule = rule;
        self
    }

    pub fn with_preference(mut self, preference: Vec<Vec<f64>>) -> Result<Self, AllocError> {
        self.preference = preference;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), AllocError> {
        let p = self.candidates.len();
        let l = self.actions.len();
        let invalid = |msg: String| Err(AllocError::InvalidProblem(msg));
        if self.mode == Mode::Cooperative && self.candidates.has_combinations() {
            return invalid("cooperative programs admit single workers only".into());
        }
        if self.cost.len() != p || self.cost.iter().any(|row| row.len() != l) {
            return invalid(format!("cost matrix must be {p}x{l}"));
        }
        if self.preference.len() != p || self.preference.iter().any(|row| row.len() != l) {
            return invalid(format!("preference matrix must be {p}x{l}"));
        }
        if self.availability.len() != p {
            return invalid(format!("availability must have {p} entries"));
        }
        let mut seen = std::collections::HashSet::new();
        for a in &self.actions {
            if !seen.insert(a) {
                return invalid(format!("duplicate action `{a}`"));
            }
        }
        let bad = |v: f64| !v.is_finite() || v < 0.0;
        for (c, row) in self.cost.iter().enumerate() {
            for (a, v) in row.iter().enumerate() {
                if v.is_some_and(bad) {
                    return invalid(format!(
                        "cost of {} for `{}` must be finite and non-negative",
                        self.candidates.get(CandidateId(c)).name,
                        self.actions[a]
                    ));
                }
            }
        }
        if self.preference.iter().flatten().copied().any(bad) {
            return invalid("preference costs must be finite and non-negative".into());
        }
        if self.availability.iter().copied().any(bad) {
            return invalid("availability costs must be finite and non-negative".into());
        }
        for (k, b) in self.budgets.iter().enumerate() {
            if b.usage.len() != p || b.usage.iter().any(|row| row.len() != l) {
                return invalid(format!("budget {k} usage must be {p}x{l}"));
            }
            if b.usage.iter().flatten().copied().any(bad) || !b.limit.is_finite() {
                return invalid(format!("budget {k} must be finite and non-negative"));
            }
        }
        Ok(())
    }

    pub fn base_count(&self) -> usize {
        self.candidates.base_count()
    }

    /// Required number of allocations, `min(L, N)`.
    pub fn target_count(&self) -> usize {
        self.actions.len().min(self.base_count())
    }

    pub fn theta_of(&self, candidate: &Candidate) -> usize {
        theta(candidate.size(), self.actions.len(), self.base_count(), self.count_rule)
    }

    /// Objective coefficient of assigning `candidate` to `action`, or `None`
    /// if the pair is infeasible.
    pub fn coefficient(&self, candidate: CandidateId, action: usize) -> Option<f64> {
        let c = self.cost[candidate.0][action]?;
        Some(c + self.preference[candidate.0][action] + self.availability[candidate.0])
    }

    pub fn action_index(&self, action: &str) -> Option<usize> {
        self.actions.iter().position(|a| a == action)
    }

    /// Number of binary variables that are not fixed to zero.
    pub fn free_variables(&self) -> usize {
        self.cost.iter().flatten().filter(|c| c.is_some()).count()
    }

    /// Objective of an arbitrary assignment (no feasibility check).
    pub fn objective_of(&self, assignment: &[(CandidateId, usize)]) -> Option<f64> {
        assignment
            .iter()
            .map(|&(c, a)| self.coefficient(c, a))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveStats {
    pub lp_solves: usize,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationSolution {
    /// Chosen `(candidate, action index)` pairs, sorted.
    pub assignment: Vec<(CandidateId, usize)>,
    pub objective: f64,
    pub solve_time: Duration,
    pub stats: SolveStats,
}

impl AllocationSolution {
    pub fn empty() -> Self {
        AllocationSolution {
            assignment: Vec::new(),
            objective: 0.0,
            solve_time: Duration::ZERO,
            stats: SolveStats::default(),
        }
    }

    pub fn members(&self, problem: &AllocationProblem) -> usize {
        self.assignment
            .iter()
            .map(|&(c, _)| problem.candidates.get(c).size())
            .sum()
    }

    pub fn candidate_for(&self, action: usize) -> Option<CandidateId> {
        self.assignment
            .iter()
            .find(|&&(_, a)| a == action)
            .map(|&(c, _)| c)
    }

    /// Human-readable `(candidate name, action id)` pairs.
    pub fn named<'a>(&self, problem: &'a AllocationProblem) -> Vec<(&'a str, &'a str)> {
        self.assignment
            .iter()
            .map(|&(c, a)| {
                (
                    problem.candidates.get(c).name.as_str(),
                    problem.actions[a].as_str(),
                )
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RULES: [CountRule; 2] = [CountRule::Ceil, CountRule::Floor];

    /// `⌊(k-1)(m-1)/(N-1+ε) + 1⌋` evaluated in floating point.
    fn theta_with_epsilon(k: usize, l: usize, n: usize, eps: f64) -> usize {
        let m = l.min(n) as f64;
        ((k as f64 - 1.0) * (m - 1.0) / (n as f64 - 1.0 + eps) + 1.0).floor() as usize
    }

    #[test]
    fn theta_single_action_three_agents() {
        for rule in RULES {
            assert_eq!(theta(2, 1, 3, rule), 1);
            assert_eq!(theta(3, 1, 3, rule), 1);
        }
    }

    #[test]
    fn floor_rule_is_identity_when_actions_cover_agents() {
        for n in 1..=8 {
            for l in n..n + 4 {
                for k in 1..=n {
                    assert_eq!(theta(k, l, n, CountRule::Floor), k, "k={k} l={l} n={n}");
                }
            }
        }
    }

    #[test]
    fn ceil_rule_is_the_small_epsilon_limit() {
        for n in 2..=12 {
            for l in 1..=14 {
                for k in 1..=n {
                    let expected = theta_with_epsilon(k, l, n, 1e-9);
                    assert_eq!(theta(k, l, n, CountRule::Ceil), expected, "k={k} l={l} n={n}");
                }
            }
        }
    }

    #[test]
    fn floor_rule_is_the_zero_epsilon_formula() {
        for n in 2..=12 {
            for l in 1..=14 {
                for k in 1..=n {
                    let expected = theta_with_epsilon(k, l, n, 0.0);
                    assert_eq!(theta(k, l, n, CountRule::Floor), expected, "k={k} l={l} n={n}");
                }
            }
        }
    }

    #[test]
    fn theta_of_singles_is_one() {
        for rule in RULES {
            for n in 1..=6 {
                for l in 1..=6 {
                    assert_eq!(theta(1, l, n, rule), 1);
                }
            }
        }
    }

    #[test]
    fn theta_is_monotone() {
        for rule in RULES {
            for n in 1..=10usize {
                for l in 1..=12usize {
                    let values: Vec<usize> = (1..=n).map(|k| theta(k, l, n, rule)).collect();
                    assert!(values.windows(2).all(|w| w[0] <= w[1]));
                    assert!(*values.last().unwrap() <= l.min(n));
                }
            }
        }
    }

    #[test]
    fn floor_rule_reaches_target() {
        for n in 1..=10usize {
            for l in 1..=12usize {
                assert_eq!(theta(n, l, n, CountRule::Floor), l.min(n));
            }
        }
    }

    #[test]
    fn pair_counts_once_under_ceil_with_three_agents() {
        assert_eq!(theta(2, 2, 3, CountRule::Ceil), 1);
        assert_eq!(theta(2, 3, 3, CountRule::Ceil), 1);
        assert_eq!(theta(2, 2, 3, CountRule::Floor), 1);
        assert_eq!(theta(2, 3, 3, CountRule::Floor), 2);
    }

    fn tiny() -> (CandidateSet, Vec<String>) {
        (
            CandidateSet::build(&["w1", "w2"], 2).unwrap(),
            vec!["a1".to_string()],
        )
    }

    #[test]
    fn rejects_negative_or_nonfinite_costs() {
        let (set, actions) = tiny();
        let p = set.len();
        let mut cost = vec![vec![Some(1.0)]; p];
        cost[0][0] = Some(-1.0);
        let err = AllocationProblem::collaborative(
            set.clone(),
            actions.clone(),
            cost,
            vec![vec![0.0]; p],
            vec![0.0; p],
        );
        assert!(err.is_err());
        let mut cost = vec![vec![Some(1.0)]; p];
        cost[1][0] = Some(f64::NAN);
        assert!(AllocationProblem::collaborative(
            set,
            actions,
            cost,
            vec![vec![0.0]; p],
            vec![0.0; p]
        )
        .is_err());
    }

    #[test]
    fn cooperative_rejects_pairs() {
        let (set, actions) = tiny();
        let p = set.len();
        assert!(AllocationProblem::cooperative(set, actions, vec![vec![Some(1.0)]; p], vec![0.0; p]).is_err());
    }
}
