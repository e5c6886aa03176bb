//! Dense bounded-variable simplex.
//!
//! Two phases on a full tableau: phase I drives the artificials of rows without
//! a usable slack to zero, phase II optimizes the real objective with every
//! artificial fixed at zero.
//! Pricing is Dantzig's rule until a run of degenerate pivots, then Bland's rule
//! until the objective moves again.

use crate::{MmsError, Result};

const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;
const OPT_TOL: f64 = 1e-9;
const DEGENERATE_STREAK: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub direction: Direction,
    pub objective: Vec<f64>,
    /// Dense rows, each of length `objective.len()`.
    pub rows: Vec<Vec<f64>>,
    pub senses: Vec<Sense>,
    pub rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    /// `n_vars` variables with zero cost and bounds `[0, ∞)`.
    pub fn new(direction: Direction, n_vars: usize) -> Self {
        LinearProgram {
            direction,
            objective: vec![0.0; n_vars],
            rows: Vec::new(),
            senses: Vec::new(),
            rhs: Vec::new(),
            lower: vec![0.0; n_vars],
            upper: vec![f64::INFINITY; n_vars],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_row(&mut self, coefficients: Vec<f64>, sense: Sense, rhs: f64) -> usize {
        self.rows.push(coefficients);
        self.senses.push(sense);
        self.rhs.push(rhs);
        self.rows.len() - 1
    }

    /// Adds a row given as `(variable, coefficient)` pairs.
    pub fn add_sparse_row(&mut self, terms: &[(usize, f64)], sense: Sense, rhs: f64) -> usize {
        let mut row = vec![0.0; self.n_vars()];
        for &(j, a) in terms {
            row[j] += a;
        }
        self.add_row(row, sense, rhs)
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    fn check(&self) -> Result<()> {
        let n = self.n_vars();
        let dims_ok = self.lower.len() == n
            && self.upper.len() == n
            && self.senses.len() == self.rows.len()
            && self.rhs.len() == self.rows.len()
            && self.rows.iter().all(|r| r.len() == n);
        if !dims_ok {
            return Err(MmsError::Dimension("linear program arrays disagree in size".into()));
        }
        let finite = self.objective.iter().chain(self.rhs.iter()).chain(self.rows.iter().flatten()).all(|v| v.is_finite());
        if !finite {
            return Err(MmsError::Lp("has non-finite coefficients".into()));
        }
        for j in 0..n {
            if self.lower[j] > self.upper[j] || self.lower[j] == f64::INFINITY || self.upper[j] == f64::NEG_INFINITY {
                return Err(MmsError::Lp(format!("variable {j} has empty bounds")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal values; meaningful when optimal.
    pub x: Vec<f64>,
    /// Row duals, `∂objective/∂rhs`; meaningful when optimal.
    pub duals: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// How an original variable maps to internal columns, all with lower bound 0.
#[derive(Clone, Copy, Debug)]
enum VarMap {
    /// `x = shift + col`
    Shifted { col: usize, shift: f64 },
    /// `x = shift - col`
    Mirrored { col: usize, shift: f64 },
    /// `x = pos - neg`
    Split { pos: usize, neg: usize },
}

struct Tableau {
    m: usize,
    n: usize,
    a: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    upper: Vec<f64>,
    at_upper: Vec<bool>,
    blocked: Vec<bool>,
    d: Vec<f64>,
    iterations: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    fn price(&mut self, cost: &[f64]) {
        for j in 0..self.n {
            let mut d = cost[j];
            for i in 0..self.m {
                let a = self.at(i, j);
                if a != 0.0 {
                    d -= cost[self.basis[i]] * a;
                }
            }
            self.d[j] = d;
        }
    }

    fn entering(&self, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.n {
            if self.is_basic[j] || self.blocked[j] {
                continue;
            }
            let score = if self.at_upper[j] {
                self.d[j]
            } else if self.upper[j] > 0.0 {
                -self.d[j]
            } else {
                continue;
            };
            if score > OPT_TOL {
                if bland {
                    return Some(j);
                }
                if best.is_none_or(|(_, s)| score > s) {
                    best = Some((j, score));
                }
            }
        }
        best.map(|(j, _)| j)
    }

    fn run(&mut self, max_iterations: usize) -> Outcome {
        let mut streak = 0;
        loop {
            if self.iterations >= max_iterations {
                return Outcome::IterationLimit;
            }
            let bland = streak >= DEGENERATE_STREAK;
            let Some(j) = self.entering(bland) else {
                return Outcome::Optimal;
            };
            self.iterations += 1;
            let delta = if self.at_upper[j] { -1.0 } else { 1.0 };
            let mut theta = self.upper[j];
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_pivot = 0.0;
            for i in 0..self.m {
                let alpha = self.at(i, j);
                let rate = -delta * alpha;
                let bi = self.basis[i];
                let (limit, hits_upper) = if rate < -PIVOT_TOL {
                    (self.beta[i] / -rate, false)
                } else if rate > PIVOT_TOL && self.upper[bi].is_finite() {
                    ((self.upper[bi] - self.beta[i]) / rate, true)
                } else {
                    continue;
                };
                let limit = limit.max(0.0);
                let better = match leave {
                    _ if limit < theta - 1e-12 => true,
                    Some((r, _)) if limit <= theta + 1e-12 => {
                        if bland {
                            bi < self.basis[r]
                        } else {
                            alpha.abs() > leave_pivot
                        }
                    }
                    _ => false,
                };
                if better {
                    theta = limit;
                    leave = Some((i, hits_upper));
                    leave_pivot = alpha.abs();
                }
            }
            if theta.is_infinite() {
                return Outcome::Unbounded;
            }
            if theta > 1e-12 {
                streak = 0;
            } else {
                streak += 1;
            }
            for i in 0..self.m {
                let alpha = self.at(i, j);
                if alpha != 0.0 {
                    self.beta[i] -= delta * alpha * theta;
                }
            }
            match leave {
                None => self.at_upper[j] = !self.at_upper[j],
                Some((r, hits_upper)) => {
                    let entering_value = if delta > 0.0 { theta } else { self.upper[j] - theta };
                    let lv = self.basis[r];
                    self.is_basic[lv] = false;
                    self.at_upper[lv] = hits_upper;
                    self.pivot(r, j);
                    self.beta[r] = entering_value;
                    self.basis[r] = j;
                    self.is_basic[j] = true;
                    self.at_upper[j] = false;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let n = self.n;
        let p = self.at(r, j);
        let row_r: Vec<f64> = self.a[r * n..(r + 1) * n].iter().map(|v| v / p).collect();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.at(i, j);
            if f != 0.0 {
                let row = &mut self.a[i * n..(i + 1) * n];
                for (x, y) in row.iter_mut().zip(&row_r) {
                    if *y != 0.0 {
                        *x -= f * y;
                    }
                }
                row[j] = 0.0;
            }
        }
        let f = self.d[j];
        if f != 0.0 {
            for (x, y) in self.d.iter_mut().zip(&row_r) {
                *x -= f * y;
            }
            self.d[j] = 0.0;
        }
        self.a[r * n..(r + 1) * n].copy_from_slice(&row_r);
        self.a[r * n + j] = 1.0;
    }

    fn value(&self, col: usize) -> f64 {
        if self.is_basic[col] {
            let i = self.basis.iter().position(|&b| b == col).expect("basic column");
            self.beta[i]
        } else if self.at_upper[col] {
            self.upper[col]
        } else {
            0.0
        }
    }
}

/// Solves `lp`; infeasibility and unboundedness are reported in the status.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    lp.check()?;
    let n_orig = lp.n_vars();
    let m = lp.n_rows();
    let sign = match lp.direction {
        Direction::Minimize => 1.0,
        Direction::Maximize => -1.0,
    };

    // structural columns
    let mut maps = Vec::with_capacity(n_orig);
    let mut col_upper = Vec::new();
    let mut col_cost = Vec::new();
    for j in 0..n_orig {
        let (lo, hi, c) = (lp.lower[j], lp.upper[j], sign * lp.objective[j]);
        let col = col_upper.len();
        if lo.is_finite() {
            maps.push(VarMap::Shifted { col, shift: lo });
            col_upper.push(hi - lo);
            col_cost.push(c);
        } else if hi.is_finite() {
            maps.push(VarMap::Mirrored { col, shift: hi });
            col_upper.push(f64::INFINITY);
            col_cost.push(-c);
        } else {
            maps.push(VarMap::Split { pos: col, neg: col + 1 });
            col_upper.extend([f64::INFINITY, f64::INFINITY]);
            col_cost.extend([c, -c]);
        }
    }
    let n_struct = col_upper.len();
    let slack_cols: Vec<Option<usize>> = {
        let mut next = n_struct;
        lp.senses
            .iter()
            .map(|s| match s {
                Sense::Eq => None,
                _ => {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect()
    };
    let n_slack = slack_cols.iter().flatten().count();
    let art0 = n_struct + n_slack;
    let n = art0 + m;

    let mut a = vec![0.0; m * n];
    let mut beta = vec![0.0; m];
    let mut flipped = vec![false; m];
    for i in 0..m {
        let row = &mut a[i * n..(i + 1) * n];
        let mut rhs = lp.rhs[i];
        for (j, &coef) in lp.rows[i].iter().enumerate() {
            if coef == 0.0 {
                continue;
            }
            match maps[j] {
                VarMap::Shifted { col, shift } => {
                    row[col] += coef;
                    rhs -= coef * shift;
                }
                VarMap::Mirrored { col, shift } => {
                    row[col] -= coef;
                    rhs -= coef * shift;
                }
                VarMap::Split { pos, neg } => {
                    row[pos] += coef;
                    row[neg] -= coef;
                }
            }
        }
        if let Some(s) = slack_cols[i] {
            row[s] = if lp.senses[i] == Sense::Le { 1.0 } else { -1.0 };
        }
        if rhs < 0.0 {
            flipped[i] = true;
            rhs = -rhs;
            row[..art0].iter_mut().for_each(|v| *v = -*v);
        }
        row[art0 + i] = 1.0;
        beta[i] = rhs;
    }

    let mut upper = col_upper.clone();
    upper.extend(std::iter::repeat_n(f64::INFINITY, n_slack + m));
    let mut is_basic = vec![false; n];
    let mut blocked = vec![false; n];
    // A row whose slack keeps coefficient +1 starts with the slack basic; its
    // artificial stays as a nonbasic column at zero so the duals can still be
    // read from it.
    let basis: Vec<usize> = (0..m)
        .map(|i| match slack_cols[i] {
            Some(s) if a[i * n + s] == 1.0 => {
                upper[art0 + i] = 0.0;
                blocked[art0 + i] = true;
                s
            }
            _ => art0 + i,
        })
        .collect();
    for &b in &basis {
        is_basic[b] = true;
    }
    let mut t = Tableau {
        m,
        n,
        a,
        beta,
        basis,
        is_basic,
        upper,
        at_upper: vec![false; n],
        blocked,
        d: vec![0.0; n],
        iterations: 0,
    };
    let max_iterations = 50_000 + 200 * (m + n);

    // phase I
    let mut cost1 = vec![0.0; n];
    cost1[art0..].iter_mut().for_each(|c| *c = 1.0);
    t.price(&cost1);
    let outcome = t.run(max_iterations);
    let infeasibility: f64 = (0..m).filter(|&i| t.basis[i] >= art0).map(|i| t.beta[i]).sum();
    let finish = |status, t: &Tableau| LpSolution {
        status,
        x: vec![f64::NAN; n_orig],
        duals: vec![f64::NAN; m],
        objective: f64::NAN,
        iterations: t.iterations,
    };
    if matches!(outcome, Outcome::IterationLimit) {
        return Ok(finish(LpStatus::IterationLimit, &t));
    }
    if infeasibility > FEAS_TOL * (1.0 + lp.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
        return Ok(finish(LpStatus::Infeasible, &t));
    }

    // phase II: artificials stay at zero
    for c in art0..n {
        t.upper[c] = 0.0;
        t.blocked[c] = true;
    }
    for i in 0..m {
        if t.basis[i] >= art0 {
            t.beta[i] = 0.0;
        }
    }
    let mut cost2 = vec![0.0; n];
    cost2[..n_struct].copy_from_slice(&col_cost);
    t.price(&cost2);
    match t.run(max_iterations) {
        Outcome::Optimal => {}
        Outcome::Unbounded => return Ok(finish(LpStatus::Unbounded, &t)),
        Outcome::IterationLimit => return Ok(finish(LpStatus::IterationLimit, &t)),
    }

    let x: Vec<f64> = maps
        .iter()
        .map(|map| match *map {
            VarMap::Shifted { col, shift } => shift + t.value(col),
            VarMap::Mirrored { col, shift } => shift - t.value(col),
            VarMap::Split { pos, neg } => t.value(pos) - t.value(neg),
        })
        .collect();
    let duals = (0..m)
        .map(|i| {
            let y = -t.d[art0 + i];
            let y = if flipped[i] { -y } else { y };
            sign * y
        })
        .collect();
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        duals,
        objective,
        iterations: t.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use rand::Rng as _;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-7 * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn single_bounded_maximum() {
        let mut lp = LinearProgram::new(Direction::Maximize, 1);
        lp.objective[0] = 1.0;
        lp.add_row(vec![1.0], Sense::Le, 3.0);
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(close(s.objective, 3.0) && close(s.duals[0], 1.0));
    }

    #[test]
    fn textbook_problem_with_duals() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18
        let mut lp = LinearProgram::new(Direction::Maximize, 2);
        lp.objective = vec![3.0, 5.0];
        lp.add_row(vec![1.0, 0.0], Sense::Le, 4.0);
        lp.add_row(vec![0.0, 2.0], Sense::Le, 12.0);
        lp.add_row(vec![3.0, 2.0], Sense::Le, 18.0);
        let s = solve_lp(&lp).unwrap();
        assert!(close(s.objective, 36.0));
        assert!(close(s.x[0], 2.0) && close(s.x[1], 6.0));
        assert!(close(s.duals[0], 0.0) && close(s.duals[1], 1.5) && close(s.duals[2], 1.0));
    }

    #[test]
    fn minimization_with_ge_and_eq_rows() {
        // min x + 2y + 3z, x + y + z = 6, y + z >= 4, z <= 3 (bound), x >= 1 (bound)
        let mut lp = LinearProgram::new(Direction::Minimize, 3);
        lp.objective = vec![1.0, 2.0, 3.0];
        lp.add_row(vec![1.0, 1.0, 1.0], Sense::Eq, 6.0);
        lp.add_row(vec![0.0, 1.0, 1.0], Sense::Ge, 4.0);
        lp.set_bounds(2, 0.0, 3.0);
        lp.set_bounds(0, 1.0, f64::INFINITY);
        let s = solve_lp(&lp).unwrap();
        assert!(close(s.objective, 10.0), "{s:?}");
        assert!(close(s.duals[0], 1.0) && close(s.duals[1], 1.0));
    }

    #[test]
    fn free_and_upper_only_variables() {
        // min -x - y, x free with x <= 2 via row, y in (-inf, 5]
        let mut lp = LinearProgram::new(Direction::Minimize, 2);
        lp.objective = vec![-1.0, -1.0];
        lp.set_bounds(0, f64::NEG_INFINITY, f64::INFINITY);
        lp.set_bounds(1, f64::NEG_INFINITY, 5.0);
        lp.add_row(vec![1.0, 0.0], Sense::Le, 2.0);
        lp.add_row(vec![1.0, 1.0], Sense::Ge, -10.0);
        let s = solve_lp(&lp).unwrap();
        assert!(close(s.objective, -7.0), "{s:?}");
    }

    #[test]
    fn infeasible_and_unbounded_are_reported() {
        let mut lp = LinearProgram::new(Direction::Minimize, 1);
        lp.add_row(vec![1.0], Sense::Le, -1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
        let mut lp = LinearProgram::new(Direction::Maximize, 2);
        lp.objective = vec![1.0, 0.0];
        lp.add_row(vec![1.0, -1.0], Sense::Le, 1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn redundant_degenerate_rows_terminate() {
        // many copies of the same constraints and a degenerate vertex at the origin
        let mut lp = LinearProgram::new(Direction::Maximize, 3);
        lp.objective = vec![10.0, -57.0, -9.0];
        for _ in 0..5 {
            lp.add_row(vec![0.5, -5.5, -2.5], Sense::Le, 0.0);
            lp.add_row(vec![0.5, -1.5, -0.5], Sense::Le, 0.0);
            lp.add_row(vec![1.0, 0.0, 0.0], Sense::Le, 1.0);
        }
        lp.add_row(vec![1.0, 1.0, 1.0], Sense::Eq, 1.0);
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
    }

    #[test]
    fn rejects_malformed_programs() {
        let mut lp = LinearProgram::new(Direction::Minimize, 2);
        lp.add_row(vec![1.0], Sense::Le, 1.0);
        assert!(solve_lp(&lp).is_err());
        let mut lp = LinearProgram::new(Direction::Minimize, 1);
        lp.set_bounds(0, 2.0, 1.0);
        assert!(solve_lp(&lp).is_err());
    }

    #[test]
    fn random_programs_satisfy_strong_duality() {
        let mut rng = rng_from(17, &[]);
        for _ in 0..200 {
            let n = rng.random_range(1..8);
            let m = rng.random_range(1..8);
            // min c x, A x >= b, x >= 0 with c >= 0 keeps the problem bounded
            let mut lp = LinearProgram::new(Direction::Minimize, n);
            lp.objective = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
            for _ in 0..m {
                let row: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..4.0)).collect();
                let sense = if rng.random_bool(0.2) { Sense::Le } else { Sense::Ge };
                lp.add_row(row, sense, rng.random_range(-3.0..6.0));
            }
            let s = solve_lp(&lp).unwrap();
            if s.status != LpStatus::Optimal {
                assert_eq!(s.status, LpStatus::Infeasible);
                continue;
            }
            for (i, row) in lp.rows.iter().enumerate() {
                let lhs: f64 = row.iter().zip(&s.x).map(|(a, x)| a * x).sum();
                match lp.senses[i] {
                    Sense::Le => assert!(lhs <= lp.rhs[i] + 1e-7 && s.duals[i] <= 1e-9),
                    Sense::Ge => assert!(lhs >= lp.rhs[i] - 1e-7 && s.duals[i] >= -1e-9),
                    Sense::Eq => unreachable!(),
                }
            }
            assert!(s.x.iter().all(|v| *v >= -1e-9));
            let dual_obj: f64 = s.duals.iter().zip(&lp.rhs).map(|(y, b)| y * b).sum();
            assert!(close(dual_obj, s.objective), "{dual_obj} vs {}", s.objective);
            // reduced costs c - yA must be nonnegative at the optimum
            for j in 0..n {
                let rc = lp.objective[j] - (0..m).map(|i| s.duals[i] * lp.rows[i][j]).sum::<f64>();
                assert!(rc >= -1e-7);
            }
        }
    }
}
