//! Dense two-phase primal simplex for `min c·x` subject to linear rows and
//! `x >= 0`.
//!
//! Sized for the relaxations solved inside branch-and-bound: a few dozen rows
//! and up to tens of thousands of columns.

const TOL: f64 = 1e-9;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_SWITCH: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    /// Sparse `(column, coefficient)` entries.
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Reduced cost of every structural column at the optimal basis.
    pub reduced_costs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl LinearProgram {
    pub fn new(cost: Vec<f64>) -> Self {
        LinearProgram {
            cost,
            constraints: Vec::new(),
        }
    }

    pub fn add(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.constraints.push(Constraint { coeffs, sense, rhs });
    }

    pub fn solve(&self) -> LpOutcome {
        Tableau::build(self).run(&self.cost)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

struct Tableau {
    m: usize,
    n: usize,
    /// Total columns excluding the right-hand side.
    cols: usize,
    width: usize,
    /// `m` constraint rows, each `width` long; last entry is the rhs.
    rows: Vec<f64>,
    /// Reduced costs; last entry is minus the objective value.
    obj: Vec<f64>,
    basis: Vec<usize>,
    artificial_from: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.cost.len();
        let m = lp.constraints.len();
        // Normalize to rhs >= 0.
        let normalized: Vec<(Sense, f64, f64)> = lp
            .constraints
            .iter()
            .map(|c| {
                if c.rhs < 0.0 {
                    let sense = match c.sense {
                        Sense::Le => Sense::Ge,
                        Sense::Ge => Sense::Le,
                        Sense::Eq => Sense::Eq,
                    };
                    (sense, -1.0, -c.rhs)
                } else {
                    (c.sense, 1.0, c.rhs)
                }
            })
            .collect();
        let slacks = normalized.iter().filter(|(s, _, _)| *s != Sense::Eq).count();
        let artificials = normalized.iter().filter(|(s, _, _)| *s != Sense::Le).count();
        let artificial_from = n + slacks;
        let cols = artificial_from + artificials;
        let width = cols + 1;
        let mut rows = vec![0.0; m * width];
        let mut basis = vec![0; m];
        let (mut next_slack, mut next_art) = (n, artificial_from);
        for (i, (c, &(sense, sign, rhs))) in lp.constraints.iter().zip(&normalized).enumerate() {
            let row = &mut rows[i * width..(i + 1) * width];
            for &(j, v) in &c.coeffs {
                row[j] += sign * v;
            }
            row[cols] = rhs;
            match sense {
                Sense::Le => {
                    row[next_slack] = 1.0;
                    basis[i] = next_slack;
                    next_slack += 1;
                }
                Sense::Ge => {
                    row[next_slack] = -1.0;
                    next_slack += 1;
                    row[next_art] = 1.0;
                    basis[i] = next_art;
                    next_art += 1;
                }
                Sense::Eq => {
                    row[next_art] = 1.0;
                    basis[i] = next_art;
                    next_art += 1;
                }
            }
        }
        Tableau {
            m,
            n,
            cols,
            width,
            rows,
            obj: vec![0.0; width],
            basis,
            artificial_from,
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.width..(i + 1) * self.width]
    }

    fn run(mut self, cost: &[f64]) -> LpOutcome {
        let limit = 50_000 + 50 * (self.m + self.cols);
        if self.artificial_from < self.cols {
            self.obj.iter_mut().for_each(|v| *v = 0.0);
            for j in self.artificial_from..self.cols {
                self.obj[j] = 1.0;
            }
            for i in 0..self.m {
                if self.basis[i] >= self.artificial_from {
                    for j in 0..self.width {
                        self.obj[j] -= self.rows[i * self.width + j];
                    }
                }
            }
            match self.iterate(Phase::One, limit) {
                Ok(()) => {}
                Err(outcome) => return outcome,
            }
            let infeasibility = -self.obj[self.cols];
            let scale = self.rhs_scale();
            if infeasibility > 1e-7 * scale {
                return LpOutcome::Infeasible;
            }
            self.drive_out_artificials();
        }

        self.obj.iter_mut().for_each(|v| *v = 0.0);
        self.obj[..self.n].copy_from_slice(cost);
        for i in 0..self.m {
            let b = self.basis[i];
            let cb = if b < self.n { cost[b] } else { 0.0 };
            if cb != 0.0 {
                for j in 0..self.width {
                    self.obj[j] -= cb * self.rows[i * self.width + j];
                }
            }
        }
        if let Err(outcome) = self.iterate(Phase::Two, limit) {
            return outcome;
        }
        let mut x = vec![0.0; self.n];
        for i in 0..self.m {
            let b = self.basis[i];
            if b < self.n {
                x[b] = self.rows[i * self.width + self.cols].max(0.0);
            }
        }
        let objective = x.iter().zip(cost).map(|(x, c)| x * c).sum();
        let mut reduced_costs = self.obj[..self.n].to_vec();
        for &b in &self.basis {
            if b < self.n {
                reduced_costs[b] = 0.0;
            }
        }
        LpOutcome::Optimal(LpSolution {
            x,
            objective,
            reduced_costs,
        })
    }

    fn rhs_scale(&self) -> f64 {
        (0..self.m)
            .map(|i| self.rows[i * self.width + self.cols].abs())
            .fold(1.0, f64::max)
    }

    fn iterate(&mut self, phase: Phase, limit: usize) -> Result<(), LpOutcome> {
        let enter_limit = match phase {
            Phase::One => self.cols,
            Phase::Two => self.artificial_from,
        };
        let mut degenerate = 0;
        for _ in 0..limit {
            let bland = degenerate >= DEGENERATE_SWITCH;
            let Some(col) = self.entering(enter_limit, bland) else {
                return Ok(());
            };
            let Some(row) = self.leaving(col) else {
                return Err(match phase {
                    Phase::One => LpOutcome::Infeasible,
                    Phase::Two => LpOutcome::Unbounded,
                });
            };
            if self.rows[row * self.width + self.cols] <= TOL {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(row, col);
        }
        Err(LpOutcome::IterationLimit)
    }

    fn entering(&self, limit: usize, bland: bool) -> Option<usize> {
        let mut best = None;
        let mut best_val = -TOL;
        for j in 0..limit {
            let d = self.obj[j];
            if d < -TOL {
                if bland {
                    return Some(j);
                }
                if d < best_val {
                    best_val = d;
                    best = Some(j);
                }
            }
        }
        best
    }

    fn leaving(&self, col: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.m {
            let a = self.rows[i * self.width + col];
            if a > TOL {
                let ratio = self.rows[i * self.width + self.cols] / a;
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - TOL || (ratio <= br + TOL && self.basis[i] < self.basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
        }
        best.map(|(i, _)| i)
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let w = self.width;
        let p = self.rows[r * w + col];
        {
            let pivot_row = &mut self.rows[r * w..(r + 1) * w];
            for v in pivot_row.iter_mut() {
                *v /= p;
            }
            pivot_row[col] = 1.0;
        }
        let (before, rest) = self.rows.split_at_mut(r * w);
        let (pivot_row, after) = rest.split_at_mut(w);
        for other in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = other[col];
            if f != 0.0 {
                eliminate(other, pivot_row, f);
                other[col] = 0.0;
            }
        }
        let f = self.obj[col];
        if f != 0.0 {
            eliminate(&mut self.obj, pivot_row, f);
            self.obj[col] = 0.0;
        }
        self.basis[r] = col;
    }

    fn drive_out_artificials(&mut self) {
        for i in 0..self.m {
            if self.basis[i] < self.artificial_from {
                continue;
            }
            let row = self.row(i);
            let col = (0..self.artificial_from).find(|&j| row[j].abs() > 1e-7);
            if let Some(col) = col {
                self.pivot(i, col);
            }
            // Otherwise the row is redundant; its artificial stays basic at 0
            // and never leaves because no eligible column touches the row.
        }
    }
}

fn eliminate(target: &mut [f64], pivot_row: &[f64], f: f64) {
    for (t, &p) in target.iter_mut().zip(pivot_row) {
        if p != 0.0 {
            *t -= f * p;
            if t.abs() < 1e-12 {
                *t = 0.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimal(lp: &LinearProgram) -> LpSolution {
        match lp.solve() {
            LpOutcome::Optimal(s) => s,
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y st x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36.
        let mut lp = LinearProgram::new(vec![-3.0, -5.0]);
        lp.add(vec![(0, 1.0)], Sense::Le, 4.0);
        lp.add(vec![(1, 2.0)], Sense::Le, 12.0);
        lp.add(vec![(0, 3.0), (1, 2.0)], Sense::Le, 18.0);
        let s = optimal(&lp);
        assert!((s.objective + 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + 2y st x + y = 3, x >= 1, y >= 1 -> x = 2, y = 1, 4.
        let mut lp = LinearProgram::new(vec![1.0, 2.0]);
        lp.add(vec![(0, 1.0), (1, 1.0)], Sense::Eq, 3.0);
        lp.add(vec![(0, 1.0)], Sense::Ge, 1.0);
        lp.add(vec![(1, 1.0)], Sense::Ge, 1.0);
        let s = optimal(&lp);
        assert!((s.objective - 4.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add(vec![(0, 1.0)], Sense::Le, 1.0);
        lp.add(vec![(0, 1.0)], Sense::Eq, 2.0);
        assert_eq!(lp.solve(), LpOutcome::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let mut lp = LinearProgram::new(vec![-1.0, 0.0]);
        lp.add(vec![(1, 1.0)], Sense::Le, 1.0);
        assert_eq!(lp.solve(), LpOutcome::Unbounded);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add(vec![(0, 1.0), (1, 1.0)], Sense::Eq, 2.0);
        lp.add(vec![(0, 2.0), (1, 2.0)], Sense::Eq, 4.0);
        let s = optimal(&lp);
        assert!((s.objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn negative_rhs_is_normalized() {
        // -x <= -2  <=>  x >= 2.
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add(vec![(0, -1.0)], Sense::Le, -2.0);
        assert!((optimal(&lp).objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn reduced_costs_bound_the_objective() {
        // Assignment relaxation: 2 workers, 2 tasks.
        let cost = vec![1.0, 4.0, 3.0, 2.0]; // x00, x01, x10, x11
        let mut lp = LinearProgram::new(cost);
        lp.add(vec![(0, 1.0), (1, 1.0)], Sense::Eq, 1.0);
        lp.add(vec![(2, 1.0), (3, 1.0)], Sense::Eq, 1.0);
        lp.add(vec![(0, 1.0), (2, 1.0)], Sense::Le, 1.0);
        lp.add(vec![(1, 1.0), (3, 1.0)], Sense::Le, 1.0);
        let s = optimal(&lp);
        assert!((s.objective - 3.0).abs() < 1e-9);
        // Forcing x01 costs at least objective + its reduced cost (= 7 here).
        assert!(s.objective + s.reduced_costs[1] <= 7.0 + 1e-9);
        assert!(s.reduced_costs.iter().all(|&d| d >= -1e-9));
    }
}
