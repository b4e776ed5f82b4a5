//! Geometry of the marginal polytope `M = conv(I(G))`.

mod config;
mod facets;
pub mod lp;
mod projection;

pub use config::{averaged_gradient_iterations, averaged_gradient_step, Mode, ReductionConfig};
pub use facets::{enumerate_facets, normalization_findings, FACET_CAP};
pub use projection::ShrunkenPolytope;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::IndependentSetFamily;
use crate::inference::dot;
use lp::{LinearProgram, LpOutcome};

/// Default LP feasibility tolerance.
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-9;
/// Points whose best uniform vertex weight falls below this are on the boundary.
pub const BOUNDARY_BAND: f64 = 1e-7;
const RECONSTRUCTION_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Facet,
    Nonnegativity,
}

/// `h.x <= offset`; facets have offset 1, nonnegativity rows are `-x_j <= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceConstraint {
    pub h: Vec<f64>,
    pub offset: f64,
    pub kind: ConstraintKind,
}

impl HalfspaceConstraint {
    pub fn nonnegativity(p: usize, j: usize) -> Self {
        let mut h = vec![0.0; p];
        h[j] = -1.0;
        HalfspaceConstraint {
            h,
            offset: 0.0,
            kind: ConstraintKind::Nonnegativity,
        }
    }

    pub fn facet(h: Vec<f64>) -> Self {
        HalfspaceConstraint {
            h,
            offset: 1.0,
            kind: ConstraintKind::Facet,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        dot(&self.h, x)
    }

    pub fn sup_norm(&self) -> f64 {
        self.h.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MembershipStatus {
    Inside,
    Boundary,
    Outside,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Certificate {
    /// Convex weights, aligned with the family's set order.
    Weights(Vec<f64>),
    /// `direction.x <= offset` holds on every vertex but fails at the query.
    Separator { direction: Vec<f64>, offset: f64 },
}

/// For inside/boundary points `margin` is the largest weight every vertex
/// can receive simultaneously; for outside points it is minus the violation
/// of the separator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipVerdict {
    pub status: MembershipStatus,
    pub certificate: Certificate,
    pub margin: f64,
}

fn check_point(family: &IndependentSetFamily, x: &[f64]) -> Result<()> {
    if x.len() != family.p() {
        return Err(Error::Dimension {
            expected: family.p(),
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "point has non-finite entries".into(),
        ));
    }
    Ok(())
}

fn hull_rows(family: &IndependentSetFamily, extra: Option<f64>) -> Vec<Vec<f64>> {
    let p = family.p();
    let sets = family.sets();
    let mut rows: Vec<Vec<f64>> = (0..p)
        .map(|j| sets.iter().map(|&s| ((s >> j) & 1) as f64).collect())
        .collect();
    rows.push(vec![1.0; sets.len()]);
    if let Some(total) = extra {
        // Column for the uniform weight tau: coefficient `sum_s s_j` per row.
        for (j, row) in rows.iter_mut().enumerate().take(p) {
            let c = sets.iter().filter(|&&s| (s >> j) & 1 == 1).count() as f64;
            row.push(c);
        }
        rows[p].push(total);
    }
    rows
}

/// Whether `x` is a convex combination of independent-set vectors, to
/// feasibility tolerance `tol`.
pub fn in_hull(family: &IndependentSetFamily, x: &[f64], tol: f64) -> Result<bool> {
    check_point(family, x)?;
    let mut rhs = x.to_vec();
    rhs.push(1.0);
    let lp = LinearProgram {
        rows: hull_rows(family, None),
        rhs,
        cost: vec![0.0; family.count()],
    };
    Ok(!matches!(lp.solve(tol)?, LpOutcome::Infeasible { .. }))
}

pub fn membership(family: &IndependentSetFamily, x: &[f64], tol: f64) -> Result<MembershipVerdict> {
    check_point(family, x)?;
    let n = family.count();
    let mut rhs = x.to_vec();
    rhs.push(1.0);
    let mut cost = vec![0.0; n + 1];
    cost[n] = -1.0;
    let lp = LinearProgram {
        rows: hull_rows(family, Some(n as f64)),
        rhs,
        cost,
    };
    match lp.solve(tol)? {
        LpOutcome::Optimal { x: sol, .. } => {
            let tau = sol[n];
            let weights: Vec<f64> = sol[..n].iter().map(|w| w + tau).collect();
            let sum: f64 = weights.iter().sum();
            let p = family.p();
            let mut recon = vec![0.0; p];
            for (w, &s) in weights.iter().zip(family.sets()) {
                for (j, r) in recon.iter_mut().enumerate() {
                    if (s >> j) & 1 == 1 {
                        *r += w;
                    }
                }
            }
            let err = recon
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            if err > RECONSTRUCTION_TOL || (sum - 1.0).abs() > tol.max(1e-9) {
                return Err(Error::LinearProgram(format!(
                    "certificate residual {err:e}, weight sum {sum}"
                )));
            }
            let status = if tau > BOUNDARY_BAND {
                MembershipStatus::Inside
            } else {
                MembershipStatus::Boundary
            };
            Ok(MembershipVerdict {
                status,
                certificate: Certificate::Weights(weights),
                margin: tau,
            })
        }
        LpOutcome::Infeasible { .. } => {
            let (direction, offset) = separator(family, x, tol)?;
            let violation = dot(&direction, x) - offset;
            Ok(MembershipVerdict {
                status: MembershipStatus::Outside,
                certificate: Certificate::Separator { direction, offset },
                margin: -violation,
            })
        }
        LpOutcome::Unbounded => Err(Error::LinearProgram(
            "membership program reported unbounded".into(),
        )),
    }
}

/// Maximizes `a.x - b` over `a.s <= b` for all vertices and `|a|_inf <= 1`.
fn separator(family: &IndependentSetFamily, x: &[f64], tol: f64) -> Result<(Vec<f64>, f64)> {
    let p = family.p();
    let n = family.count();
    // Columns: a+ (p), a- (p), b, slack per vertex (n), box slacks u (p), w (p).
    let cols = 4 * p + 1 + n;
    let mut rows = Vec::with_capacity(n + 2 * p);
    let mut rhs = Vec::with_capacity(n + 2 * p);
    for (k, &s) in family.sets().iter().enumerate() {
        let mut r = vec![0.0; cols];
        for j in 0..p {
            if (s >> j) & 1 == 1 {
                r[j] = 1.0;
                r[p + j] = -1.0;
            }
        }
        r[2 * p] = -1.0;
        r[2 * p + 1 + k] = 1.0;
        rows.push(r);
        rhs.push(0.0);
    }
    for j in 0..p {
        let mut r = vec![0.0; cols];
        r[j] = 1.0;
        r[2 * p + 1 + n + j] = 1.0;
        rows.push(r);
        rhs.push(1.0);
        let mut r = vec![0.0; cols];
        r[p + j] = 1.0;
        r[3 * p + 1 + n + j] = 1.0;
        rows.push(r);
        rhs.push(1.0);
    }
    let mut cost = vec![0.0; cols];
    for j in 0..p {
        cost[j] = -x[j];
        cost[p + j] = x[j];
    }
    cost[2 * p] = 1.0;
    match (LinearProgram { rows, rhs, cost }).solve(tol)? {
        LpOutcome::Optimal { x: sol, objective } => {
            if objective >= 0.0 {
                return Err(Error::LinearProgram(
                    "hull infeasible but no separating direction found".into(),
                ));
            }
            let a = (0..p).map(|j| sol[j] - sol[p + j]).collect();
            Ok((a, sol[2 * p]))
        }
        other => Err(Error::LinearProgram(format!(
            "separation program failed: {other:?}"
        ))),
    }
}

/// Largest `t >= 0` with `x + t e_i` in `M`, or `None` when `x` itself is
/// outside.
pub fn headroom(family: &IndependentSetFamily, x: &[f64], i: usize) -> Result<Option<f64>> {
    check_point(family, x)?;
    let p = family.p();
    if i >= p {
        return Err(Error::NodeOutOfRange { node: i + 1, p });
    }
    let n = family.count();
    let mut rows = hull_rows(family, None);
    for (j, row) in rows.iter_mut().enumerate() {
        row.push(if j == i { -1.0 } else { 0.0 });
    }
    let mut rhs = x.to_vec();
    rhs.push(1.0);
    let mut cost = vec![0.0; n + 1];
    cost[n] = -1.0;
    match (LinearProgram { rows, rhs, cost }).solve(MEMBERSHIP_TOLERANCE)? {
        LpOutcome::Optimal { x: sol, .. } => Ok(Some(sol[n])),
        LpOutcome::Infeasible { .. } => Ok(None),
        LpOutcome::Unbounded => Err(Error::LinearProgram("headroom program unbounded".into())),
    }
}

/// `x` lies in the shrunken polytope: every coordinate is at least `q eps`
/// and `x + eps e_i` stays in `M` for every `i`.
pub fn shrunken_membership(
    family: &IndependentSetFamily,
    x: &[f64],
    cfg: &ReductionConfig,
) -> Result<bool> {
    check_point(family, x)?;
    let floor = cfg.floor();
    if x.iter().any(|&v| v < floor) {
        return Ok(false);
    }
    let mut y = x.to_vec();
    for i in 0..x.len() {
        y[i] += cfg.epsilon;
        let ok = in_hull(family, &y, MEMBERSHIP_TOLERANCE)?;
        y[i] = x[i];
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Membership decided from an explicit facet list instead of the LP.
pub fn facet_membership(facets: &[HalfspaceConstraint], x: &[f64], tol: f64) -> MembershipStatus {
    let worst = facets
        .iter()
        .map(|f| f.value(x) - f.offset)
        .fold(f64::NEG_INFINITY, f64::max);
    if worst > tol {
        MembershipStatus::Outside
    } else if worst >= -tol {
        MembershipStatus::Boundary
    } else {
        MembershipStatus::Inside
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintStatus {
    Inactive,
    Active,
    Critical,
}

/// Slack classification of a facet at `x`: critical when the slack is below
/// `eps |h|_inf`, active when it is below `2 eps |h|_inf`. Nonnegativity rows
/// are handled by the floor and always report inactive.
pub fn constraint_status(
    h: &HalfspaceConstraint,
    x: &[f64],
    cfg: &ReductionConfig,
) -> ConstraintStatus {
    if h.kind == ConstraintKind::Nonnegativity {
        return ConstraintStatus::Inactive;
    }
    let v = h.value(x);
    let unit = cfg.epsilon * h.sup_norm();
    if v > h.offset - unit {
        ConstraintStatus::Critical
    } else if v > h.offset - 2.0 * unit {
        ConstraintStatus::Active
    } else {
        ConstraintStatus::Inactive
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{enumerate_independent_sets, generate_graph, Graph, GraphKind};

    fn k2() -> IndependentSetFamily {
        enumerate_independent_sets(&Graph::new(2, [(0, 1)]).unwrap()).unwrap()
    }

    fn k2_cfg() -> ReductionConfig {
        ReductionConfig::desk_custom(2, 0.01, 2.0, 10).unwrap()
    }

    #[test]
    fn membership_examples() {
        let fam = k2();
        let v = membership(&fam, &[1.0 / 3.0, 1.0 / 3.0], 1e-9).unwrap();
        assert_eq!(v.status, MembershipStatus::Inside);
        let v = membership(&fam, &[0.5, 0.5], 1e-9).unwrap();
        assert_eq!(v.status, MembershipStatus::Boundary);
        let v = membership(&fam, &[0.6, 0.6], 1e-9).unwrap();
        assert_eq!(v.status, MembershipStatus::Outside);
        match v.certificate {
            Certificate::Separator { direction, offset } => {
                assert!((direction[0] - 1.0).abs() < 1e-9 && (direction[1] - 1.0).abs() < 1e-9);
                assert!((offset - 1.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
        assert!((v.margin + 0.2).abs() < 1e-9);
    }

    #[test]
    fn weights_reconstruct() {
        let g = generate_graph(GraphKind::Cycle, 5, 0).unwrap();
        let fam = enumerate_independent_sets(&g).unwrap();
        let x = [0.2, 0.3, 0.1, 0.25, 0.15];
        let v = membership(&fam, &x, 1e-9).unwrap();
        assert_eq!(v.status, MembershipStatus::Inside);
        let Certificate::Weights(w) = v.certificate else {
            panic!()
        };
        assert!(w.iter().all(|&x| x >= 0.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        // The odd-cycle facet: sum x <= 2 fails at 0.41 each.
        let v = membership(&fam, &[0.41; 5], 1e-9).unwrap();
        assert_eq!(v.status, MembershipStatus::Outside);
    }

    #[test]
    fn shrunken_examples() {
        let fam = k2();
        let cfg = k2_cfg();
        assert!(shrunken_membership(&fam, &[0.25, 0.25], &cfg).unwrap());
        // 0.48 + 0.48 + 0.01 = 0.97 still fits under x1 + x2 <= 1.
        assert!(shrunken_membership(&fam, &[0.48, 0.48], &cfg).unwrap());
        assert!(!shrunken_membership(&fam, &[0.495, 0.496], &cfg).unwrap());
        assert!(!shrunken_membership(&fam, &[0.019, 0.3], &cfg).unwrap());
    }

    #[test]
    fn start_point_is_shrunken_everywhere() {
        for kind in [
            GraphKind::Complete,
            GraphKind::Path,
            GraphKind::Empty,
            GraphKind::Star,
        ] {
            for p in 2..=6 {
                let fam = enumerate_independent_sets(&generate_graph(kind, p, 0).unwrap()).unwrap();
                let cfg = ReductionConfig::desk(p, 10).unwrap();
                assert!(shrunken_membership(&fam, &cfg.start_point(), &cfg).unwrap());
            }
        }
    }

    #[test]
    fn status_examples() {
        let h = HalfspaceConstraint::facet(vec![1.0, 1.0]);
        let cfg = k2_cfg();
        assert_eq!(
            constraint_status(&h, &[0.2, 0.2], &cfg),
            ConstraintStatus::Inactive
        );
        assert_eq!(
            constraint_status(&h, &[0.492, 0.492], &cfg),
            ConstraintStatus::Active
        );
        assert_eq!(
            constraint_status(&h, &[0.496, 0.496], &cfg),
            ConstraintStatus::Critical
        );
    }

    #[test]
    fn headroom_examples() {
        let fam = k2();
        let t = headroom(&fam, &[0.3, 0.2], 0).unwrap().unwrap();
        assert!((t - 0.5).abs() < 1e-12);
        assert!(headroom(&fam, &[0.6, 0.6], 1).unwrap().is_none());
        let c5 =
            enumerate_independent_sets(&generate_graph(GraphKind::Cycle, 5, 0).unwrap()).unwrap();
        // Odd-cycle facet binds first: 2 - 5 * 0.35 = 0.25 < 1 - 0.7.
        let t = headroom(&c5, &[0.35; 5], 2).unwrap().unwrap();
        assert!((t - 0.25).abs() < 1e-12, "{t}");
    }

    #[test]
    fn rejects_bad_points() {
        let fam = k2();
        assert!(matches!(
            membership(&fam, &[0.1], 1e-9),
            Err(Error::Dimension { .. })
        ));
        assert!(membership(&fam, &[f64::NAN, 0.1], 1e-9).is_err());
    }
}
