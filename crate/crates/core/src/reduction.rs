//! Marginal recovery from a backward-mapping oracle.
//!
//! `mu(0)` minimizes the negative entropy `Phi*` over the marginal polytope,
//! and `grad Phi* = theta`. So projected gradient descent driven by an
//! approximate backward oracle converges to `mu(0)`; clamping each coordinate
//! at the floor `q eps` stands in for the projection onto the shrunken
//! polytope. Self-reducibility then turns marginals into the partition function.

use serde::Serialize;

use crate::backward::{BackwardOracle, NoisyOracle, OracleSpec};
use crate::error::{Error, Result};
use crate::graph::{remove_prefix, Graph};
use crate::inference::HardcoreModel;
use crate::polytope::{ReductionConfig, ShrunkenPolytope};
use crate::seeds::derive_seed;

/// Projection applied after each gradient step.
#[derive(Clone, Copy, Debug)]
pub enum Projector<'a> {
    /// Coordinatewise `max(x_i, q eps)`.
    Threshold,
    /// Exact Euclidean projection onto the shrunken polytope.
    Shrunken(&'a ShrunkenPolytope),
}

impl Projector<'_> {
    pub fn apply(&self, y: Vec<f64>, floor: f64) -> Result<Vec<f64>> {
        match self {
            Projector::Threshold => Ok(y.into_iter().map(|v| v.max(floor)).collect()),
            Projector::Shrunken(poly) => poly.project(&y),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceFailure {
    /// 1-based index of the iterate at which the oracle failed.
    pub step: usize,
    pub message: String,
}

/// Full record of a reduction run. With budget `T` there are `T` oracle
/// outputs, `T + 1` iterates, and the estimate averages the first `T`.
#[derive(Clone, Debug, Serialize)]
pub struct ReductionTrace {
    pub config: ReductionConfig,
    pub iterates: Vec<Vec<f64>>,
    /// Running means `(1/t) sum_{k <= t} x^k`.
    pub averages: Vec<Vec<f64>>,
    pub oracle_outputs: Vec<Vec<f64>>,
    pub final_estimate: Vec<f64>,
    pub failure: Option<TraceFailure>,
}

impl ReductionTrace {
    /// Whether the recorded iterates follow the thresholding rule bit for bit.
    pub fn follows_threshold_rule(&self) -> bool {
        let s = self.config.step;
        let floor = self.config.floor();
        self.oracle_outputs.iter().enumerate().all(|(t, theta)| {
            let (x, next) = (&self.iterates[t], &self.iterates[t + 1]);
            x.iter()
                .zip(theta)
                .zip(next)
                .all(|((xi, th), ni)| (xi - s * th).max(floor) == *ni)
        })
    }
}

fn run(
    oracle: &mut dyn BackwardOracle,
    cfg: &ReductionConfig,
    start: Vec<f64>,
    projector: Projector<'_>,
) -> Result<(ReductionTrace, Option<Error>)> {
    cfg.validate()?;
    if start.len() != cfg.p {
        return Err(Error::Dimension {
            expected: cfg.p,
            got: start.len(),
        });
    }
    let t_max = cfg.iterations;
    let floor = cfg.floor();
    let mut iterates = Vec::with_capacity(t_max + 1);
    let mut averages = Vec::with_capacity(t_max);
    let mut outputs = Vec::with_capacity(t_max);
    let mut sum = vec![0.0; cfg.p];
    let mut x = start;
    let mut failure = None;
    for t in 1..=t_max {
        for (a, v) in sum.iter_mut().zip(&x) {
            *a += v;
        }
        averages.push(sum.iter().map(|a| a / t as f64).collect::<Vec<_>>());
        let step = oracle.query(&x).and_then(|theta| {
            let y: Vec<f64> = x
                .iter()
                .zip(&theta)
                .map(|(xi, th)| xi - cfg.step * th)
                .collect();
            Ok((projector.apply(y, floor)?, theta))
        });
        match step {
            Ok((next, theta)) => {
                outputs.push(theta);
                iterates.push(std::mem::replace(&mut x, next));
            }
            Err(e) => {
                failure = Some((t, e));
                break;
            }
        }
    }
    iterates.push(x);
    let final_estimate = averages.last().cloned().unwrap_or_default();
    let (failure, err) = match failure {
        Some((step, e)) => (
            Some(TraceFailure {
                step,
                message: e.to_string(),
            }),
            Some(e),
        ),
        None => (None, None),
    };
    Ok((
        ReductionTrace {
            config: cfg.clone(),
            iterates,
            averages,
            oracle_outputs: outputs,
            final_estimate,
            failure,
        },
        err,
    ))
}

/// Runs `T` steps of `x <- max(x - s theta_hat(x), q eps)` from
/// `(1/2p, ..., 1/2p)`. An oracle failure ends the trace early and is
/// recorded in it.
pub fn projected_threshold_gradient(
    oracle: &mut dyn BackwardOracle,
    cfg: &ReductionConfig,
) -> Result<ReductionTrace> {
    Ok(run(oracle, cfg, cfg.start_point(), Projector::Threshold)?.0)
}

/// As [`projected_threshold_gradient`] with an explicit start and projector.
pub fn projected_gradient_from(
    oracle: &mut dyn BackwardOracle,
    cfg: &ReductionConfig,
    start: Vec<f64>,
    projector: Projector<'_>,
) -> Result<ReductionTrace> {
    Ok(run(oracle, cfg, start, projector)?.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenericRun {
    /// Mean of the first `T` iterates.
    pub average: Vec<f64>,
    /// The iterate after the last step.
    pub last: Vec<f64>,
    /// Largest 2-norm of a gradient seen at an averaged iterate.
    pub max_grad_norm: f64,
    pub iterations: usize,
}

/// Projected gradient descent with averaging. `projector` must map onto a
/// convex set; the start point is projected first, so `T = 1` returns `P(x1)`.
pub fn generic_projected_gradient<G, P>(
    mut grad: G,
    projector: P,
    x1: &[f64],
    step: f64,
    iterations: usize,
) -> Result<GenericRun>
where
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
    P: Fn(&[f64]) -> Vec<f64>,
{
    if iterations == 0 {
        return Err(Error::InvalidArgument("T must be at least 1".into()));
    }
    let mut x = projector(x1);
    let mut sum = vec![0.0; x.len()];
    let mut max_grad_norm: f64 = 0.0;
    let mut y = vec![0.0; x.len()];
    for _ in 0..iterations {
        for (a, v) in sum.iter_mut().zip(&x) {
            *a += v;
        }
        let g = grad(&x)?;
        if g.len() != x.len() {
            return Err(Error::Dimension {
                expected: x.len(),
                got: g.len(),
            });
        }
        max_grad_norm = max_grad_norm.max(g.iter().map(|v| v * v).sum::<f64>().sqrt());
        for ((yi, xi), gi) in y.iter_mut().zip(&x).zip(&g) {
            *yi = xi - step * gi;
        }
        x = projector(&y);
    }
    Ok(GenericRun {
        average: sum.iter().map(|a| a / iterations as f64).collect(),
        last: x,
        max_grad_norm,
        iterations,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MarginalEstimate {
    pub estimate: Vec<f64>,
    /// `4 gamma p^{7/2} / (q eps^2)`, reported next to the measured error.
    pub error_bound: f64,
    pub oracle_calls: u64,
    pub trace: ReductionTrace,
}

/// Estimates `mu(0)` as the averaged iterate of the thresholding reduction.
pub fn estimate_marginals_at_zero(
    oracle: &mut dyn BackwardOracle,
    cfg: &ReductionConfig,
) -> Result<MarginalEstimate> {
    let (trace, err) = run(oracle, cfg, cfg.start_point(), Projector::Threshold)?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(MarginalEstimate {
        estimate: trace.final_estimate.clone(),
        error_bound: cfg.marginal_error_bound(),
        oracle_calls: oracle.calls(),
        trace,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RemovalStep {
    /// Original 1-based label of the node whose marginal is used.
    pub label: usize,
    pub marginal: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartitionEstimate {
    pub z: f64,
    pub log_z: f64,
    pub steps: Vec<RemovalStep>,
}

/// `Z = prod_i 1 / (1 - mu_i(G without nodes 1..i-1))`, where `mu_i` is the
/// first coordinate of the estimator's output on the reduced graph.
pub fn estimate_partition_function<F>(
    g: &Graph,
    mut marginal_estimator: F,
) -> Result<PartitionEstimate>
where
    F: FnMut(&Graph) -> Result<Vec<f64>>,
{
    let mut log_z = 0.0;
    let mut steps = Vec::with_capacity(g.p());
    for k in 0..g.p() {
        let sub = remove_prefix(g, k)?;
        let mu = marginal_estimator(&sub.graph)?;
        if mu.len() != sub.graph.p() {
            return Err(Error::Dimension {
                expected: sub.graph.p(),
                got: mu.len(),
            });
        }
        let m = mu[0];
        if !(m < 1.0) || !m.is_finite() {
            return Err(Error::MarginalNotBelowOne {
                step: k + 1,
                value: m,
            });
        }
        log_z -= (-m).ln_1p();
        steps.push(RemovalStep {
            label: sub.labels[0],
            marginal: m,
        });
    }
    Ok(PartitionEstimate {
        z: log_z.exp(),
        log_z,
        steps,
    })
}

/// Exact `mu(0)` by enumeration.
pub fn exact_marginals_at_zero(g: &Graph) -> Result<Vec<f64>> {
    let model = HardcoreModel::new(g)?;
    Ok(model.marginals(&vec![0.0; g.p()])?.into_inner())
}

/// Partition function with every marginal produced by the reduction driven
/// by a noisy oracle. The oracle for the `k`-th reduced graph is seeded from
/// `(seed, k)`.
pub fn estimate_partition_function_via_reduction(
    g: &Graph,
    iterations: usize,
    gamma: f64,
    seed: u64,
) -> Result<PartitionEstimate> {
    let mut k = 0u64;
    estimate_partition_function(g, |sub| {
        let model = HardcoreModel::new(sub)?;
        let cfg = ReductionConfig::desk(sub.p(), iterations)?.with_gamma(gamma)?;
        let spec = OracleSpec {
            gamma,
            seed: derive_seed(seed, &[k]),
        };
        k += 1;
        let mut oracle = NoisyOracle::new(&model, spec)?;
        Ok(estimate_marginals_at_zero(&mut oracle, &cfg)?.estimate)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backward::{ExactOracle, ZeroOracle};
    use crate::graph::{generate_graph, parse_graph, GraphKind};
    use approx::assert_relative_eq;

    #[test]
    fn zero_oracle_is_a_fixed_point() {
        let cfg = ReductionConfig::desk(3, 25).unwrap();
        let trace = projected_threshold_gradient(&mut ZeroOracle::default(), &cfg).unwrap();
        assert_eq!(trace.iterates.len(), 26);
        assert!(trace.iterates.iter().all(|x| x == &cfg.start_point()));
        assert!(trace
            .final_estimate
            .iter()
            .all(|v| (v - 1.0 / 6.0).abs() < 1e-15));
        assert!(trace.follows_threshold_rule());
    }

    #[test]
    fn single_node_start_is_already_optimal() {
        let g = parse_graph("p=1").unwrap();
        let model = HardcoreModel::new(&g).unwrap();
        let cfg = ReductionConfig::desk(1, 50).unwrap();
        let est = estimate_marginals_at_zero(&mut ExactOracle::new(&model), &cfg).unwrap();
        assert_relative_eq!(est.estimate[0], 0.5, epsilon = 1e-9);
        assert_eq!(est.oracle_calls, 50);
    }

    #[test]
    fn exact_oracle_moves_towards_marginals() {
        // A generous step (custom budget) so the test runs quickly.
        let g = generate_graph(GraphKind::Complete, 3, 0).unwrap();
        let model = HardcoreModel::new(&g).unwrap();
        let mut cfg = ReductionConfig::desk(3, 4000).unwrap();
        cfg.step = 0.02;
        let trace = projected_threshold_gradient(&mut ExactOracle::new(&model), &cfg).unwrap();
        assert!(trace.follows_threshold_rule());
        let last = trace.iterates.last().unwrap();
        for v in last {
            assert!((v - 0.25).abs() < 1e-6, "{last:?}");
        }
    }

    #[test]
    fn oracle_failure_is_recorded() {
        struct Failing(u64);
        impl BackwardOracle for Failing {
            fn query(&mut self, x: &[f64]) -> Result<Vec<f64>> {
                self.0 += 1;
                if self.0 == 3 {
                    Err(Error::InvalidArgument("boom".into()))
                } else {
                    Ok(vec![1.0; x.len()])
                }
            }
            fn calls(&self) -> u64 {
                self.0
            }
        }
        let cfg = ReductionConfig::desk(2, 10).unwrap();
        let trace = projected_threshold_gradient(&mut Failing(0), &cfg).unwrap();
        assert_eq!(trace.failure.as_ref().unwrap().step, 3);
        assert_eq!(trace.oracle_outputs.len(), 2);
        assert_eq!(trace.iterates.len(), 3);
        assert!(estimate_marginals_at_zero(&mut Failing(0), &cfg).is_err());
    }

    #[test]
    fn generic_descent_on_quadratic() {
        // G(x) = |x|^2 on [-1, 1]^2 from (1, 1): L = 2 sqrt 2, R = sqrt 2.
        let clamp = |y: &[f64]| y.iter().map(|v| v.clamp(-1.0, 1.0)).collect::<Vec<_>>();
        let delta = 1e-2;
        let l = 2.0 * 2f64.sqrt();
        let s = crate::polytope::averaged_gradient_step(delta, l);
        let t = crate::polytope::averaged_gradient_iterations(2f64.sqrt(), l, delta) as usize;
        let run = generic_projected_gradient(
            |x| Ok(x.iter().map(|v| 2.0 * v).collect()),
            clamp,
            &[1.0, 1.0],
            s,
            t,
        )
        .unwrap();
        let g: f64 = run.average.iter().map(|v| v * v).sum();
        assert!(g <= delta, "G = {g}");
        assert!(run.max_grad_norm <= l + 1e-12);
    }

    #[test]
    fn generic_descent_linear_reaches_corner() {
        let clamp = |y: &[f64]| y.iter().map(|v| v.clamp(0.0, 1.0)).collect::<Vec<_>>();
        let run = generic_projected_gradient(|_| Ok(vec![1.0, -1.0]), clamp, &[0.5, 0.5], 0.1, 20)
            .unwrap();
        assert_eq!(run.last, vec![0.0, 1.0]);
        let once = generic_projected_gradient(|_| Ok(vec![1.0, -1.0]), clamp, &[2.0, 0.5], 0.1, 1)
            .unwrap();
        assert_eq!(once.average, vec![1.0, 0.5]);
    }

    #[test]
    fn partition_function_small_cases() {
        let single = parse_graph("p=1").unwrap();
        let z = estimate_partition_function(&single, exact_marginals_at_zero).unwrap();
        assert_relative_eq!(z.z, 2.0, epsilon = 1e-12);
        let k2 = parse_graph("p=2; 1 2").unwrap();
        let z = estimate_partition_function(&k2, exact_marginals_at_zero).unwrap();
        assert_relative_eq!(z.z, 3.0, epsilon = 1e-12);
        assert_eq!(z.steps[0].label, 1);
        assert_relative_eq!(z.steps[0].marginal, 1.0 / 3.0, epsilon = 1e-15);
        let p3 = parse_graph("p=3; 1 2; 2 3").unwrap();
        let z = estimate_partition_function(&p3, exact_marginals_at_zero).unwrap();
        assert_relative_eq!(z.z, 5.0, epsilon = 1e-12);
        let labels: Vec<usize> = z.steps.iter().map(|s| s.label).collect();
        assert_eq!(labels, vec![1, 2, 3]);
    }

    #[test]
    fn partition_function_rejects_unit_marginal() {
        let k2 = parse_graph("p=2; 1 2").unwrap();
        let err = estimate_partition_function(&k2, |g| Ok(vec![1.0; g.p()])).unwrap_err();
        assert!(matches!(err, Error::MarginalNotBelowOne { step: 1, .. }));
    }

    #[test]
    fn reduction_route_is_reproducible() {
        let g = generate_graph(GraphKind::Path, 3, 0).unwrap();
        let a = estimate_partition_function_via_reduction(&g, 50, 0.05, 9).unwrap();
        let b = estimate_partition_function_via_reduction(&g, 50, 0.05, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.z > 1.0);
    }
}
