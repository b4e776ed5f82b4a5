//! Exact forward mapping by summation over all independent sets.
//!
//! Every quantity here is a weighted sum over `I(G)` with weights
//! `exp(<theta, sigma>)`. Sums are shifted by the largest log-weight before
//! exponentiating, so `|theta|_inf` up to several hundred is safe.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::backward::{backward_map, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::graph::{enumerate_independent_sets, Graph, IndependentSetFamily};

/// Canonical parameters `theta`; `exp(theta_i)` is the fugacity of node `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CanonicalParams(Vec<f64>);

impl CanonicalParams {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if let Some(bad) = theta.iter().find(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "canonical parameter {bad} is not finite"
            )));
        }
        Ok(CanonicalParams(theta))
    }

    pub fn zeros(p: usize) -> Self {
        CanonicalParams(vec![0.0; p])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for CanonicalParams {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Node marginals `mu_i = P(sigma_i = 1)`, strictly inside `(0, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MeanParams(Vec<f64>);

impl MeanParams {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if let Some(bad) = mu.iter().find(|m| !(**m > 0.0 && **m < 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "mean parameter {bad} is outside (0, 1)"
            )));
        }
        Ok(MeanParams(mu))
    }

    /// Skips the range check; for values produced by exact summation, which
    /// can touch 0 or 1 only through floating-point underflow.
    pub(crate) fn from_exact(mu: Vec<f64>) -> Self {
        MeanParams(mu)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for MeanParams {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Masses of the three classes that partition `I(G)` relative to node `i`:
/// sets containing `i`, sets to which `i` can be added, and sets holding a
/// neighbor of `i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClassProbabilities {
    pub node: usize,
    pub p_in: f64,
    pub p_addable: f64,
    pub p_conflict: f64,
}

/// First and second moments from one enumeration pass.
#[derive(Clone, Debug)]
pub struct Moments {
    pub log_partition: f64,
    pub mu: Vec<f64>,
    /// Row-major `p x p` covariance, present when requested.
    pub cov: Option<Vec<f64>>,
}

/// Hard-core model on a fixed graph, with `I(G)` enumerated once.
#[derive(Clone, Debug)]
pub struct HardcoreModel {
    family: IndependentSetFamily,
}

impl HardcoreModel {
    pub fn new(g: &Graph) -> Result<Self> {
        Ok(HardcoreModel {
            family: enumerate_independent_sets(g)?,
        })
    }

    pub fn from_family(family: IndependentSetFamily) -> Self {
        HardcoreModel { family }
    }

    pub fn family(&self) -> &IndependentSetFamily {
        &self.family
    }

    pub fn graph(&self) -> &Graph {
        self.family.graph()
    }

    pub fn p(&self) -> usize {
        self.family.p()
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.p() {
            return Err(Error::Dimension {
                expected: self.p(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// `<theta, sigma>` for every set, plus the maximum.
    fn log_weights(&self, theta: &[f64]) -> (Vec<f64>, f64) {
        let mut max = f64::NEG_INFINITY;
        let lw: Vec<f64> = self
            .family
            .sets()
            .iter()
            .map(|&s| {
                let w = dot_mask(theta, s);
                max = max.max(w);
                w
            })
            .collect();
        (lw, max)
    }

    /// Log-partition, marginals and optionally the covariance.
    pub fn moments(&self, theta: &[f64], with_cov: bool) -> Result<Moments> {
        self.check_dim(theta)?;
        let p = self.p();
        let sets = self.family.sets();
        let (mut w, max) = self.log_weights(theta);
        let mut z = 0.0;
        for x in w.iter_mut() {
            *x = (*x - max).exp();
            z += *x;
        }
        let mut mu = vec![0.0; p];
        for (&s, &wk) in sets.iter().zip(&w) {
            let wk = wk / z;
            for_each_bit(s, |i| mu[i] += wk);
        }
        let cov = with_cov.then(|| {
            // Centered second pass; keeps small variances accurate.
            let mut cov = vec![0.0; p * p];
            let mut dev = vec![0.0; p];
            for (&s, &wk) in sets.iter().zip(&w) {
                let wk = wk / z;
                for i in 0..p {
                    dev[i] = (s >> i & 1) as f64 - mu[i];
                }
                for i in 0..p {
                    let a = wk * dev[i];
                    for j in i..p {
                        cov[i * p + j] += a * dev[j];
                    }
                }
            }
            for i in 0..p {
                for j in 0..i {
                    cov[i * p + j] = cov[j * p + i];
                }
            }
            cov
        });
        Ok(Moments {
            log_partition: max + z.ln(),
            mu,
            cov,
        })
    }

    /// `Phi(theta) = log sum_sigma exp(<theta, sigma>)`.
    pub fn log_partition(&self, theta: &[f64]) -> Result<f64> {
        self.check_dim(theta)?;
        let (lw, max) = self.log_weights(theta);
        Ok(max + lw.iter().map(|w| (w - max).exp()).sum::<f64>().ln())
    }

    /// Forward mapping `theta -> mu(theta) = grad Phi(theta)`.
    pub fn marginals(&self, theta: &[f64]) -> Result<MeanParams> {
        Ok(MeanParams::from_exact(self.moments(theta, false)?.mu))
    }

    /// `d mu_i / d theta_r = P(sigma_i = sigma_r = 1) - mu_i mu_r`, as rows.
    pub fn covariance(&self, theta: &[f64]) -> Result<Vec<Vec<f64>>> {
        let p = self.p();
        let cov = self.moments(theta, true)?.cov.expect("requested");
        Ok(cov.chunks(p).map(<[f64]>::to_vec).collect())
    }

    pub fn class_probabilities(&self, theta: &[f64], node: usize) -> Result<ClassProbabilities> {
        self.check_dim(theta)?;
        let p = self.p();
        if node >= p {
            return Err(Error::NodeOutOfRange { node: node + 1, p });
        }
        let nbrs = self.graph().neighbors(node);
        let (lw, max) = self.log_weights(theta);
        let (mut f_in, mut f_add, mut f_conflict) = (0.0, 0.0, 0.0);
        for (&s, w) in self.family.sets().iter().zip(lw) {
            let w = (w - max).exp();
            if s >> node & 1 == 1 {
                f_in += w;
            } else if s & nbrs != 0 {
                f_conflict += w;
            } else {
                f_add += w;
            }
        }
        let z = f_in + f_add + f_conflict;
        Ok(ClassProbabilities {
            node,
            p_in: f_in / z,
            p_addable: f_add / z,
            p_conflict: f_conflict / z,
        })
    }

    /// Unnormalized class sums `(f(S_i), f(S_i^-), f(S_i^conflict))`, each
    /// scaled by the same factor `exp(-max log-weight)`.
    pub fn class_weights(&self, theta: &[f64], node: usize) -> Result<(f64, f64, f64)> {
        let c = self.class_probabilities(theta, node)?;
        let (_, max) = self.log_weights(theta);
        let z = (self.log_partition(theta)? - max).exp();
        Ok((c.p_in * z, c.p_addable * z, c.p_conflict * z))
    }

    /// `Phi*(mu) = <mu, theta(mu)> - Phi(theta(mu))`, i.e. the negative
    /// entropy; the supremum is located by the backward solver.
    pub fn conjugate_dual(&self, mu: &MeanParams) -> Result<f64> {
        self.conjugate_dual_with_tol(mu, DEFAULT_TOLERANCE)
    }

    pub fn conjugate_dual_with_tol(&self, mu: &MeanParams, tol: f64) -> Result<f64> {
        let sol = backward_map(self, mu, tol)?;
        let phi = self.log_partition(&sol.theta)?;
        Ok(dot(mu, &sol.theta) - phi)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn dot_mask(theta: &[f64], mut s: u64) -> f64 {
    let mut acc = 0.0;
    while s != 0 {
        acc += theta[s.trailing_zeros() as usize];
        s &= s - 1;
    }
    acc
}

#[inline]
fn for_each_bit(mut s: u64, mut f: impl FnMut(usize)) {
    while s != 0 {
        f(s.trailing_zeros() as usize);
        s &= s - 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{parse_graph, GraphKind};
    use approx::assert_relative_eq;

    fn model(text: &str) -> HardcoreModel {
        HardcoreModel::new(&parse_graph(text).unwrap()).unwrap()
    }

    #[test]
    fn log_partition_closed_forms() {
        let single = model("p=1");
        assert_relative_eq!(
            single.log_partition(&[0.0]).unwrap(),
            2f64.ln(),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            single.log_partition(&[3f64.ln()]).unwrap(),
            4f64.ln(),
            epsilon = 1e-15
        );
        let k3 = model("p=3; 1 2; 2 3; 1 3");
        assert_relative_eq!(
            k3.log_partition(&[0.0; 3]).unwrap(),
            4f64.ln(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn log_partition_survives_large_parameters() {
        let single = model("p=1");
        let phi = single.log_partition(&[700.0]).unwrap();
        assert_relative_eq!(phi, 700.0 + (1.0 + (-700f64).exp()).ln(), epsilon = 1e-12);
        let phi = single.log_partition(&[-700.0]).unwrap();
        assert!(phi.is_finite() && (0.0..1e-300).contains(&phi));
    }

    #[test]
    fn marginals_small_graphs() {
        assert_relative_eq!(model("p=1").marginals(&[0.0]).unwrap()[0], 0.5);
        let p3 = model("p=3; 1 2; 2 3").marginals(&[0.0; 3]).unwrap();
        for (a, b) in p3.iter().zip([0.4, 0.2, 0.4]) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
        let k2 = model("p=2; 1 2").marginals(&[0.0; 2]).unwrap();
        assert_relative_eq!(k2[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(k2[1], 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn covariance_small_graphs() {
        let c = model("p=1").covariance(&[0.0]).unwrap();
        assert_relative_eq!(c[0][0], 0.25, epsilon = 1e-15);
        let c = model("p=2; 1 2").covariance(&[0.0; 2]).unwrap();
        assert_relative_eq!(c[0][0], 2.0 / 9.0, epsilon = 1e-15);
        assert_relative_eq!(c[1][1], 2.0 / 9.0, epsilon = 1e-15);
        assert_relative_eq!(c[0][1], -1.0 / 9.0, epsilon = 1e-15);
        assert_relative_eq!(c[1][0], -1.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn class_probabilities_small_graphs() {
        let c = model("p=1").class_probabilities(&[0.0], 0).unwrap();
        assert_eq!((c.p_in, c.p_addable, c.p_conflict), (0.5, 0.5, 0.0));
        let third = 1.0 / 3.0;
        let c = model("p=2; 1 2").class_probabilities(&[0.0; 2], 0).unwrap();
        assert_relative_eq!(c.p_in, third, epsilon = 1e-15);
        assert_relative_eq!(c.p_addable, third, epsilon = 1e-15);
        assert_relative_eq!(c.p_conflict, third, epsilon = 1e-15);
        // Star K_{1,2} with the center at node 1: I = {0, c, a, b, ab}.
        let star = model("p=3; 1 2; 1 3");
        let c = star.class_probabilities(&[0.0; 3], 0).unwrap();
        assert_relative_eq!(c.p_conflict, 3.0 / 5.0, epsilon = 1e-15);
        assert!(star.class_probabilities(&[0.0; 3], 3).is_err());
    }

    #[test]
    fn dimension_is_checked() {
        assert!(matches!(
            model("p=2; 1 2").log_partition(&[0.0]),
            Err(Error::Dimension {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn conjugate_dual_closed_forms() {
        let single = model("p=1");
        let at = |m: f64| {
            single
                .conjugate_dual(&MeanParams::new(vec![m]).unwrap())
                .unwrap()
        };
        assert_relative_eq!(at(0.5), -(2f64.ln()), epsilon = 1e-10);
        let q: f64 = 0.25;
        assert_relative_eq!(
            at(q),
            q * q.ln() + (1.0 - q) * (1.0 - q).ln(),
            epsilon = 1e-10
        );
        let c5 = HardcoreModel::new(&crate::graph::generate_graph(GraphKind::Cycle, 5, 0).unwrap())
            .unwrap();
        let mu0 = c5.marginals(&[0.0; 5]).unwrap();
        assert_relative_eq!(
            c5.conjugate_dual(&mu0).unwrap(),
            -(11f64.ln()),
            epsilon = 1e-10
        );
    }

    #[test]
    fn mean_params_range_checked() {
        assert!(MeanParams::new(vec![0.5, 1.0]).is_err());
        assert!(MeanParams::new(vec![0.0]).is_err());
        assert!(MeanParams::new(vec![f64::NAN]).is_err());
        assert!(CanonicalParams::new(vec![f64::INFINITY]).is_err());
    }
}
