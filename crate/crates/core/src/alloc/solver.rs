use std::time::Instant;

use super::lp::{LinearProgram, LpOutcome, Sense};
use super::{
    infeasibility, objective_tol, AllocError, AllocationProblem, AllocationSolution, CandidateId,
    SolveStats,
};

const INTEGRAL_TOL: f64 = 1e-6;

/// Exact solve by LP-based branch-and-bound.
///
/// A first pass finds the optimal objective. A second, include-first
/// depth-first pass over the variables in `(candidate, action)` order then
/// picks, among all assignments within tolerance of that optimum, the one with
/// the fewest members and the lexicographically smallest pair list.
pub fn solve(problem: &AllocationProblem) -> Result<AllocationSolution, AllocError> {
    problem.validate()?;
    let started = Instant::now();
    if problem.actions.is_empty() {
        return Ok(AllocationSolution::empty());
    }
    let model = Model::new(problem);
    let mut stats = SolveStats::default();
    let optimum = model.optimum(&mut stats)?.ok_or_else(|| infeasibility(problem))?;
    let leaf = model.refine(optimum, &mut stats)?;
    let assignment = leaf
        .iter()
        .map(|&v| (CandidateId(model.vars[v].cand), model.vars[v].action))
        .collect();
    Ok(AllocationSolution {
        assignment,
        objective: model.exact_objective(&leaf),
        solve_time: started.elapsed(),
        stats,
    })
}

struct Var {
    cand: usize,
    action: usize,
    coef: f64,
    theta: usize,
    size: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Fix {
    Free,
    Zero,
    One,
}

struct Model<'a> {
    problem: &'a AllocationProblem,
    /// Feasible pairs sorted by candidate, then action.
    vars: Vec<Var>,
    target: usize,
}

struct Relaxation {
    bound: f64,
    x: Vec<f64>,
    /// Reduced cost per variable; infinite for variables forced to zero.
    reduced: Vec<f64>,
    /// Count still to be covered by free variables.
    remaining: usize,
    fixed_members: usize,
    /// Variables not yet fixed and still able to take value one.
    eligible: Vec<usize>,
}

impl Relaxation {
    fn is_integral(&self) -> bool {
        self.eligible
            .iter()
            .all(|&v| self.x[v] < INTEGRAL_TOL || self.x[v] > 1.0 - INTEGRAL_TOL)
    }
}

impl<'a> Model<'a> {
    fn new(problem: &'a AllocationProblem) -> Self {
        let mut vars = Vec::new();
        for cand in problem.candidates.iter() {
            for a in 0..problem.actions.len() {
                if let Some(coef) = problem.coefficient(cand.id, a) {
                    vars.push(Var {
                        cand: cand.id.0,
                        action: a,
                        coef,
                        theta: problem.theta_of(cand),
                        size: cand.size(),
                    });
                }
            }
        }
        Model {
            problem,
            vars,
            target: problem.target_count(),
        }
    }

    fn members(&self, v: usize) -> &[usize] {
        &self.problem.candidates.get(CandidateId(self.vars[v].cand)).members
    }

    fn exact_objective(&self, chosen: &[usize]) -> f64 {
        chosen.iter().map(|&v| self.vars[v].coef).sum()
    }

    fn relax(&self, fix: &[Fix], stats: &mut SolveStats) -> Result<Option<Relaxation>, AllocError> {
        let n = self.problem.base_count();
        let l = self.problem.actions.len();
        let mut used = vec![false; n];
        let mut done = vec![false; l];
        let mut count = 0;
        let mut fixed_members = 0;
        let mut fixed_cost = 0.0;
        let mut spent = vec![0.0; self.problem.budgets.len()];
        let mut x = vec![0.0; self.vars.len()];
        for (v, var) in self.vars.iter().enumerate() {
            if fix[v] != Fix::One {
                continue;
            }
            if done[var.action] {
                return Ok(None);
            }
            done[var.action] = true;
            for &m in self.members(v) {
                if used[m] {
                    return Ok(None);
                }
                used[m] = true;
            }
            count += var.theta;
            fixed_members += var.size;
            fixed_cost += var.coef;
            for (k, b) in self.problem.budgets.iter().enumerate() {
                spent[k] += b.usage[var.cand][var.action];
            }
            x[v] = 1.0;
        }
        if count > self.target {
            return Ok(None);
        }
        let remaining = self.target - count;
        let room: Vec<f64> = self
            .problem
            .budgets
            .iter()
            .zip(&spent)
            .map(|(b, s)| b.limit - s + 1e-9 * b.limit.abs().max(1.0))
            .collect();
        if room.iter().any(|&r| r < 0.0) {
            return Ok(None);
        }
        let eligible: Vec<usize> = (0..self.vars.len())
            .filter(|&v| {
                let var = &self.vars[v];
                fix[v] == Fix::Free
                    && !done[var.action]
                    && var.theta <= remaining
                    && self.members(v).iter().all(|&m| !used[m])
                    && self
                        .problem
                        .budgets
                        .iter()
                        .zip(&room)
                        .all(|(b, &r)| b.usage[var.cand][var.action] <= r)
            })
            .collect();
        let mut reduced = vec![f64::INFINITY; self.vars.len()];
        if remaining == 0 {
            for &v in &eligible {
                reduced[v] = self.vars[v].coef;
            }
            return Ok(Some(Relaxation {
                bound: fixed_cost,
                x,
                reduced,
                remaining,
                fixed_members,
                eligible,
            }));
        }
        if eligible.is_empty() {
            return Ok(None);
        }

        let mut lp = LinearProgram::new(eligible.iter().map(|&v| self.vars[v].coef).collect());
        let mut by_action: Vec<Vec<(usize, f64)>> = vec![Vec::new(); l];
        let mut by_agent: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut count_row = Vec::with_capacity(eligible.len());
        for (j, &v) in eligible.iter().enumerate() {
            by_action[self.vars[v].action].push((j, 1.0));
            for &m in self.members(v) {
                by_agent[m].push((j, 1.0));
            }
            count_row.push((j, self.vars[v].theta as f64));
        }
        for row in by_action.into_iter().chain(by_agent) {
            if row.len() > 1 {
                lp.add(row, Sense::Le, 1.0);
            }
        }
        lp.add(count_row, Sense::Eq, remaining as f64);
        for (b, &r) in self.problem.budgets.iter().zip(&room) {
            let row: Vec<(usize, f64)> = eligible
                .iter()
                .enumerate()
                .map(|(j, &v)| (j, b.usage[self.vars[v].cand][self.vars[v].action]))
                .filter(|&(_, u)| u != 0.0)
                .collect();
            if !row.is_empty() {
                lp.add(row, Sense::Le, r);
            }
        }
        // Upper bounds come from the action rows; single-variable actions need
        // an explicit one.
        let mut per_action = vec![0usize; l];
        for &v in &eligible {
            per_action[self.vars[v].action] += 1;
        }
        for (j, &v) in eligible.iter().enumerate() {
            if per_action[self.vars[v].action] == 1 {
                lp.add(vec![(j, 1.0)], Sense::Le, 1.0);
            }
        }

        stats.lp_solves += 1;
        match lp.solve() {
            LpOutcome::Optimal(s) => {
                for (j, &v) in eligible.iter().enumerate() {
                    x[v] = s.x[j];
                    reduced[v] = s.reduced_costs[j];
                }
                Ok(Some(Relaxation {
                    bound: fixed_cost + s.objective,
                    x,
                    reduced,
                    remaining,
                    fixed_members,
                    eligible,
                }))
            }
            LpOutcome::Infeasible => Ok(None),
            LpOutcome::Unbounded => Err(AllocError::InvalidProblem(
                "relaxation unbounded; costs must be non-negative".into(),
            )),
            LpOutcome::IterationLimit => Err(AllocError::InvalidProblem(
                "simplex iteration limit reached".into(),
            )),
        }
    }

    /// Variables at one in an integral relaxation.
    fn chosen(&self, fix: &[Fix], relax: &Relaxation) -> Vec<usize> {
        (0..self.vars.len())
            .filter(|&v| fix[v] == Fix::One || (fix[v] == Fix::Free && relax.x[v] > 0.5))
            .collect()
    }

    /// Optimal objective value and the root relaxation, or `None` if
    /// infeasible.
    fn optimum(&self, stats: &mut SolveStats) -> Result<Option<(f64, Relaxation)>, AllocError> {
        let root_fix = vec![Fix::Free; self.vars.len()];
        let Some(root) = self.relax(&root_fix, stats)? else {
            return Ok(None);
        };
        let mut best = f64::INFINITY;
        let mut stack = vec![root_fix];
        while let Some(fix) = stack.pop() {
            stats.nodes += 1;
            let Some(relax) = self.relax(&fix, stats)? else {
                continue;
            };
            if relax.bound >= best - objective_tol(best.min(relax.bound)) {
                continue;
            }
            if relax.is_integral() {
                best = self.exact_objective(&self.chosen(&fix, &relax));
                continue;
            }
            // Most fractional variable, lowest index on ties.
            let branch = relax
                .eligible
                .iter()
                .copied()
                .filter(|&v| relax.x[v] > INTEGRAL_TOL && relax.x[v] < 1.0 - INTEGRAL_TOL)
                .min_by(|&a, &b| {
                    let da = (relax.x[a] - 0.5).abs();
                    let db = (relax.x[b] - 0.5).abs();
                    da.total_cmp(&db).then(a.cmp(&b))
                })
                .expect("fractional relaxation has a fractional variable");
            let mut down = fix.clone();
            down[branch] = Fix::Zero;
            let mut up = fix;
            up[branch] = Fix::One;
            stack.push(down);
            stack.push(up);
        }
        if best.is_finite() {
            Ok(Some((best, root)))
        } else {
            Ok(None)
        }
    }

    fn refine(&self, optimum: (f64, Relaxation), stats: &mut SolveStats) -> Result<Vec<usize>, AllocError> {
        let (best_obj, root) = optimum;
        let cutoff = best_obj + objective_tol(best_obj);
        // Reduced-cost fixing: any assignment using `v` costs at least
        // `root.bound + reduced[v]`.
        let base: Vec<Fix> = (0..self.vars.len())
            .map(|v| {
                if root.bound + root.reduced[v] > cutoff {
                    Fix::Zero
                } else {
                    Fix::Free
                }
            })
            .collect();

        let mut best: Option<(usize, Vec<usize>)> = None;
        let mut stack = vec![(base, 0usize)];
        while let Some((fix, from)) = stack.pop() {
            stats.nodes += 1;
            let Some(relax) = self.relax(&fix, stats)? else {
                continue;
            };
            if relax.bound > cutoff {
                continue;
            }
            let members_lb = relax.fixed_members + relax.remaining;
            if best.as_ref().is_some_and(|(m, _)| members_lb >= *m) {
                continue;
            }
            let next = relax.eligible.iter().copied().find(|&v| v >= from);
            let Some(v) = next else {
                if relax.remaining == 0 {
                    let chosen: Vec<usize> = (0..self.vars.len()).filter(|&v| fix[v] == Fix::One).collect();
                    if self.exact_objective(&chosen) <= cutoff {
                        best = Some((relax.fixed_members, chosen));
                    }
                }
                continue;
            };
            let mut exclude = fix.clone();
            exclude[v] = Fix::Zero;
            let mut include = fix;
            include[v] = Fix::One;
            stack.push((exclude, v + 1));
            stack.push((include, v + 1));
        }
        best.map(|(_, chosen)| chosen).ok_or_else(|| {
            AllocError::InvalidProblem("optimum lost during tie-break refinement".into())
        })
    }
}
