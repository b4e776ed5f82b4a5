//! Euclidean projection onto the shrunken polytope, written out as a small
//! quadratic program over explicit facets and the coordinate floor.

use super::{ConstraintKind, HalfspaceConstraint, ReductionConfig};
use crate::error::{Error, Result};
use crate::inference::dot;

/// `{x : h.x <= 1 - eps |h|_inf for each facet h, x_j >= q eps}`.
#[derive(Clone, Debug)]
pub struct ShrunkenPolytope {
    normals: Vec<Vec<f64>>,
    bounds: Vec<f64>,
    p: usize,
    floor: f64,
}

impl ShrunkenPolytope {
    pub fn new(facets: &[HalfspaceConstraint], cfg: &ReductionConfig) -> Result<Self> {
        let p = cfg.p;
        let floor = cfg.floor();
        let mut normals = Vec::new();
        let mut bounds = Vec::new();
        for f in facets.iter().filter(|f| f.kind == ConstraintKind::Facet) {
            if f.h.len() != p {
                return Err(Error::Dimension {
                    expected: p,
                    got: f.h.len(),
                });
            }
            let sup = f.h.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            normals.push(f.h.clone());
            bounds.push(1.0 - cfg.epsilon * sup);
        }
        for j in 0..p {
            let mut a = vec![0.0; p];
            a[j] = -1.0;
            normals.push(a);
            bounds.push(-floor);
        }
        let poly = ShrunkenPolytope {
            normals,
            bounds,
            p,
            floor,
        };
        let corner = vec![floor; p];
        if poly.max_violation(&corner) > 1e-12 {
            return Err(Error::InvalidArgument(
                "the floor corner lies outside the shrunken polytope".into(),
            ));
        }
        Ok(poly)
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.normals
            .iter()
            .zip(&self.bounds)
            .map(|(a, &b)| dot(a, x) - b)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Nearest point of the polytope to `y`, by a primal active-set method
    /// started at the floor corner.
    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.p {
            return Err(Error::Dimension {
                expected: self.p,
                got: y.len(),
            });
        }
        let p = self.p;
        let mut x = vec![self.floor; p];
        let mut working: Vec<usize> = (self.normals.len() - p..self.normals.len()).collect();
        let max_iter = 50 * (self.normals.len() + p) + 100;
        for _ in 0..max_iter {
            let r: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
            let lambda = self.least_squares_multipliers(&working, &r)?;
            let mut d = r.clone();
            for (&i, &l) in working.iter().zip(&lambda) {
                for (dj, aj) in d.iter_mut().zip(&self.normals[i]) {
                    *dj -= l * aj;
                }
            }
            let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if d.iter().all(|v| v.abs() <= 1e-13 * scale) {
                let worst = lambda.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1));
                match worst {
                    Some((k, &l)) if l < -1e-13 => {
                        working.remove(k);
                    }
                    _ => return Ok(x),
                }
                continue;
            }
            let mut alpha = 1.0;
            let mut blocking = None;
            for (i, (a, &b)) in self.normals.iter().zip(&self.bounds).enumerate() {
                if working.contains(&i) {
                    continue;
                }
                let ad = dot(a, &d);
                if ad > 1e-15 {
                    let ratio = ((b - dot(a, &x)) / ad).max(0.0);
                    if ratio < alpha {
                        alpha = ratio;
                        blocking = Some(i);
                    }
                }
            }
            for (xj, dj) in x.iter_mut().zip(&d) {
                *xj += alpha * dj;
            }
            if let Some(i) = blocking {
                working.push(i);
            }
        }
        Err(Error::NotConverged {
            iterations: max_iter,
            grad_norm: f64::NAN,
        })
    }

    /// Solves `(A A^T) lambda = A r` for the working rows `A`, dropping rows
    /// that are linearly dependent on earlier ones (their multiplier is 0).
    fn least_squares_multipliers(&self, working: &[usize], r: &[f64]) -> Result<Vec<f64>> {
        let m = working.len();
        if m == 0 {
            return Ok(Vec::new());
        }
        let rows: Vec<&Vec<f64>> = working.iter().map(|&i| &self.normals[i]).collect();
        let mut g = vec![vec![0.0; m + 1]; m];
        for a in 0..m {
            for b in 0..m {
                g[a][b] = dot(rows[a], rows[b]);
            }
            g[a][m] = dot(rows[a], r);
        }
        // Gaussian elimination with partial pivoting; zero pivots mark
        // dependent rows.
        let mut pivot_col = vec![usize::MAX; m];
        let mut row = 0;
        for c in 0..m {
            let Some(best) = (row..m).max_by(|&a, &b| g[a][c].abs().total_cmp(&g[b][c].abs()))
            else {
                break;
            };
            if g[best][c].abs() < 1e-12 {
                continue;
            }
            g.swap(row, best);
            for k in 0..m {
                if k != row {
                    let f = g[k][c] / g[row][c];
                    if f != 0.0 {
                        for j in c..=m {
                            g[k][j] -= f * g[row][j];
                        }
                    }
                }
            }
            pivot_col[row] = c;
            row += 1;
        }
        let mut lambda = vec![0.0; m];
        for k in 0..row {
            let c = pivot_col[k];
            lambda[c] = g[k][m] / g[k][c];
        }
        Ok(lambda)
    }
}
