//! Dense two-phase simplex for the small LPs behind membership queries.
//!
//! Standard form: minimize `c.x` subject to `A x = b`, `x >= 0`. Bland's rule
//! is used throughout; the 0/1 vertex matrices here are highly degenerate.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct LinearProgram {
    /// Constraint rows, each of length `n`.
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub cost: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal {
        x: Vec<f64>,
        objective: f64,
    },
    /// Phase 1 could not push the residual below the tolerance.
    Infeasible {
        residual: f64,
    },
    Unbounded,
}

struct Tableau {
    /// `m` rows of `width` entries; the last entry is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.t[r][self.width - 1]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= piv;
        }
        let pivot_row = self.t[row].clone();
        for (r, line) in self.t.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let factor = line[col];
            if factor != 0.0 {
                for (v, pv) in line.iter_mut().zip(&pivot_row) {
                    *v -= factor * pv;
                }
                line[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Reduced costs of `cost` (length `width - 1`) under the current basis.
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                for (dj, a) in d.iter_mut().zip(&self.t[r]) {
                    *dj -= cb * a;
                }
            }
        }
        d
    }

    /// Runs simplex iterations over columns `< allowed`. Returns `false` on
    /// unboundedness.
    fn optimize(&mut self, cost: &[f64], allowed: usize, max_iter: usize) -> Result<bool> {
        for _ in 0..max_iter {
            let d = self.reduced_costs(cost);
            let Some(enter) = (0..allowed).find(|&j| d[j] < -COST_TOL) else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.t.len() {
                let a = self.t[r][enter];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r) / a;
                    let better = match leave {
                        None => true,
                        Some((lr, best)) => {
                            ratio < best - 1e-14
                                || (ratio <= best + 1e-14 && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, enter),
                None => return Ok(false),
            }
        }
        Err(Error::LinearProgram(format!(
            "simplex exceeded {max_iter} iterations"
        )))
    }
}

impl LinearProgram {
    pub fn solve(&self, feasibility_tol: f64) -> Result<LpOutcome> {
        let m = self.rows.len();
        let n = self.cost.len();
        if self.rhs.len() != m || self.rows.iter().any(|r| r.len() != n) {
            return Err(Error::LinearProgram("inconsistent dimensions".into()));
        }
        let width = n + m + 1;
        let mut t = Vec::with_capacity(m);
        for (r, row) in self.rows.iter().enumerate() {
            let sign = if self.rhs[r] < 0.0 { -1.0 } else { 1.0 };
            let mut line = vec![0.0; width];
            for (dst, &v) in line.iter_mut().zip(row) {
                *dst = sign * v;
            }
            line[n + r] = 1.0;
            line[width - 1] = sign * self.rhs[r];
            t.push(line);
        }
        let mut tab = Tableau {
            t,
            basis: (n..n + m).collect(),
            width,
        };
        let max_iter = 50 * (n + m) + 1000;

        let mut phase1 = vec![0.0; width - 1];
        for c in phase1.iter_mut().skip(n) {
            *c = 1.0;
        }
        tab.optimize(&phase1, n + m, max_iter)?;
        let residual: f64 = (0..m)
            .filter(|&r| tab.basis[r] >= n)
            .map(|r| tab.rhs(r).abs())
            .sum();
        if residual > feasibility_tol {
            return Ok(LpOutcome::Infeasible { residual });
        }
        // Drive remaining artificials out of the basis; rows with no
        // original column left are redundant and are dropped.
        let mut r = 0;
        while r < tab.t.len() {
            if tab.basis[r] >= n {
                match (0..n).find(|&j| tab.t[r][j].abs() > 1e-9) {
                    Some(j) => tab.pivot(r, j),
                    None => {
                        tab.t.remove(r);
                        tab.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }

        let mut phase2 = self.cost.clone();
        phase2.resize(width - 1, 0.0);
        if !tab.optimize(&phase2, n, max_iter)? {
            return Ok(LpOutcome::Unbounded);
        }
        let mut x = vec![0.0; n];
        for (r, &b) in tab.basis.iter().enumerate() {
            if b < n {
                x[b] = tab.rhs(r).max(0.0);
            }
        }
        let objective = x.iter().zip(&self.cost).map(|(a, c)| a * c).sum();
        Ok(LpOutcome::Optimal { x, objective })
    }
}
