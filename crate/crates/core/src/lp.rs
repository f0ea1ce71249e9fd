//! Dense two-phase simplex for small standard-form linear programs:
//!
//! ```text
//! minimize  c·x   subject to  A x = b,  x ≥ 0
//! ```
//!
//! Problem sizes here are a few dozen rows by at most a few hundred columns,
//! so the tableau is kept dense and reduced costs are recomputed from scratch
//! on every iteration.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-12;
/// Degenerate pivots tolerated under Dantzig's rule before switching to
/// Bland's rule, which cannot cycle.
const DEGENERATE_STREAK: usize = 50;

#[derive(Debug, Clone)]
pub struct LinearProgram {
    n_vars: usize,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    cost: Vec<f64>,
    feasibility_tol: f64,
    max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    /// Phase one could not drive the total constraint violation below the
    /// feasibility tolerance; `residual` is the smallest violation found.
    Infeasible {
        residual: f64,
    },
    Unbounded,
}

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        LinearProgram {
            n_vars,
            rows: Vec::new(),
            rhs: Vec::new(),
            cost: vec![0.0; n_vars],
            feasibility_tol: 1e-10,
            max_iterations: 50_000,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_constraints(&self) -> usize {
        self.rows.len()
    }

    /// Adds `coeffs · x = rhs`.
    pub fn add_equality(&mut self, coeffs: Vec<f64>, rhs: f64) -> Result<()> {
        if coeffs.len() != self.n_vars {
            return Err(Error::DimensionMismatch(format!(
                "constraint has {} coefficients, program has {} variables",
                coeffs.len(),
                self.n_vars
            )));
        }
        self.rows.push(coeffs);
        self.rhs.push(rhs);
        Ok(())
    }

    /// Sets the (minimized) objective.
    pub fn set_objective(&mut self, cost: Vec<f64>) -> Result<()> {
        if cost.len() != self.n_vars {
            return Err(Error::DimensionMismatch(format!(
                "objective has {} coefficients, program has {} variables",
                cost.len(),
                self.n_vars
            )));
        }
        self.cost = cost;
        Ok(())
    }

    /// Total absolute constraint violation tolerated at the end of phase one.
    pub fn with_feasibility_tol(mut self, tol: f64) -> Self {
        self.feasibility_tol = tol;
        self
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        let mut tab = Tableau::new(self);
        let residual = tab.phase_one(self.max_iterations)?;
        if residual > self.feasibility_tol {
            return Ok(LpOutcome::Infeasible { residual });
        }
        tab.expel_artificials();
        match tab.phase_two(&self.cost, self.max_iterations)? {
            Phase::Optimal => {
                let x = tab.primal();
                let objective = x.iter().zip(&self.cost).map(|(x, c)| x * c).sum();
                Ok(LpOutcome::Optimal(LpSolution { x, objective }))
            }
            Phase::Unbounded => Ok(LpOutcome::Unbounded),
        }
    }
}

enum Phase {
    Optimal,
    Unbounded,
}

struct Tableau {
    n: usize,
    /// Columns: `n` structural, then one artificial per row, then the rhs.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    blocked: Vec<bool>,
    rhs: usize,
}

impl Tableau {
    fn new(lp: &LinearProgram) -> Self {
        let n = lp.n_vars;
        let m = lp.rows.len();
        let width = n + m + 1;
        let mut t = Vec::with_capacity(m);
        for (i, (row, &b)) in lp.rows.iter().zip(&lp.rhs).enumerate() {
            let sign = if b < 0.0 { -1.0 } else { 1.0 };
            let mut r = vec![0.0; width];
            for (dst, &a) in r.iter_mut().zip(row) {
                *dst = sign * a;
            }
            r[n + i] = 1.0;
            r[width - 1] = sign * b;
            t.push(r);
        }
        Tableau {
            n,
            t,
            basis: (n..n + m).collect(),
            blocked: vec![false; n + m],
            rhs: n + m,
        }
    }

    fn rhs_col(&self) -> usize {
        self.rhs
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.n
    }

    fn phase_one(&mut self, max_iter: usize) -> Result<f64> {
        let mut cost = vec![0.0; self.blocked.len()];
        for c in cost.iter_mut().skip(self.n) {
            *c = 1.0;
        }
        // Phase one is bounded below by zero.
        self.iterate(&cost, max_iter)?;
        let rhs = self.rhs_col();
        Ok(self
            .basis
            .iter()
            .zip(&self.t)
            .filter(|(&j, _)| self.is_artificial(j))
            .map(|(_, row)| row[rhs].max(0.0))
            .sum())
    }

    /// Pivots artificial variables out of the basis where possible, drops the
    /// redundant rows where not, and bars artificials from re-entering.
    fn expel_artificials(&mut self) {
        let mut i = 0;
        while i < self.t.len() {
            if self.is_artificial(self.basis[i]) {
                let pivot_col = (0..self.n)
                    .filter(|&j| !self.basis.contains(&j))
                    .max_by(|&a, &b| self.t[i][a].abs().total_cmp(&self.t[i][b].abs()))
                    .filter(|&j| self.t[i][j].abs() > 1e-9);
                match pivot_col {
                    Some(j) => self.pivot(i, j),
                    None => {
                        // Row is a combination of the others.
                        self.t.remove(i);
                        self.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
        for j in self.n..self.blocked.len() {
            self.blocked[j] = true;
        }
    }

    fn phase_two(&mut self, cost: &[f64], max_iter: usize) -> Result<Phase> {
        let mut full = vec![0.0; self.blocked.len()];
        full[..self.n].copy_from_slice(cost);
        self.iterate(&full, max_iter)
    }

    fn iterate(&mut self, cost: &[f64], max_iter: usize) -> Result<Phase> {
        let rhs = self.rhs_col();
        let mut degenerate = 0usize;
        for _ in 0..max_iter {
            let reduced = self.reduced_costs(cost);
            let bland = degenerate >= DEGENERATE_STREAK;
            let mut entering = None;
            let mut best = -COST_EPS;
            for (j, &d) in reduced.iter().enumerate() {
                if self.blocked[j] || d >= -COST_EPS {
                    continue;
                }
                if bland {
                    entering = Some(j);
                    break;
                }
                if d < best {
                    best = d;
                    entering = Some(j);
                }
            }
            let Some(j) = entering else {
                return Ok(Phase::Optimal);
            };

            let mut leaving: Option<(usize, f64)> = None;
            for (i, row) in self.t.iter().enumerate() {
                let a = row[j];
                if a <= PIVOT_EPS {
                    continue;
                }
                let ratio = row[rhs].max(0.0) / a;
                leaving = match leaving {
                    None => Some((i, ratio)),
                    Some((k, r)) => {
                        if ratio < r - 1e-14
                            || (ratio <= r + 1e-14 && self.basis[i] < self.basis[k])
                        {
                            Some((i, ratio))
                        } else {
                            Some((k, r))
                        }
                    }
                };
            }
            let Some((i, ratio)) = leaving else {
                return Ok(Phase::Unbounded);
            };
            if ratio <= 1e-14 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(i, j);
        }
        Err(Error::Lp(format!(
            "simplex did not converge within {max_iter} iterations"
        )))
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for (row, &bj) in self.t.iter().zip(&self.basis) {
            let cb = cost[bj];
            if cb != 0.0 {
                for (dj, &a) in d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for a in self.t[r].iter_mut() {
            *a /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (a, &pr) in row.iter_mut().zip(&pivot_row) {
                    *a -= f * pr;
                }
                row[c] = 0.0;
            }
        }
        let rhs = pivot_row.len() - 1;
        for row in self.t.iter_mut() {
            if row[rhs] < 0.0 && row[rhs] > -1e-13 {
                row[rhs] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    fn primal(&self) -> Vec<f64> {
        let rhs = self.rhs_col();
        let mut x = vec![0.0; self.n];
        for (row, &j) in self.t.iter().zip(&self.basis) {
            if j < self.n {
                x[j] = row[rhs].max(0.0);
            }
        }
        x
    }
}
