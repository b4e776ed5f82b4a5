//! Backward mapping `mu -> theta(mu)` and the oracle wrappers used by the
//! reduction.
//!
//! `theta(mu)` maximizes the strictly concave `F_mu(theta) = <mu, theta> -
//! Phi(theta)`, whose gradient is `mu - mu(theta)` and whose Hessian is minus
//! the covariance. The solver is a damped Newton ascent started at zero.
//!
//! Boundary and exterior points have no maximizer. Along any direction `d`,
//! `F_mu(theta + t d)` grows like `t (<mu, d> - max_sigma <sigma, d>)`, so the
//! solver stops with [`Error::Divergence`] as soon as a Newton direction has
//! non-negative recession slope, or when `|theta|_inf` passes the cap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inference::{dot, dot_mask, CanonicalParams, HardcoreModel, MeanParams};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// `|theta|_inf` beyond which `mu` is declared outside the interior.
pub const THETA_CAP: f64 = 1e4;

#[derive(Clone, Copy, Debug)]
pub struct NewtonSettings {
    /// Target for `|mu - mu(theta)|_inf`.
    pub tol: f64,
    /// Converged steps must also be this short (sup norm).
    pub step_tol: f64,
    pub max_iter: usize,
    pub theta_cap: f64,
    /// Armijo sufficient-increase constant.
    pub armijo: f64,
    /// Relative recession slope below which a direction counts as unbounded.
    pub recession_tol: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            tol: DEFAULT_TOLERANCE,
            step_tol: 1e-6,
            max_iter: 20_000,
            theta_cap: THETA_CAP,
            armijo: 1e-4,
            recession_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BackwardSolution {
    pub theta: CanonicalParams,
    pub iterations: usize,
    /// `|mu - mu(theta)|_inf` at the returned point.
    pub final_grad_norm: f64,
    pub converged: bool,
    /// `F_mu` at every accepted iterate, starting from `theta = 0`.
    #[serde(skip)]
    pub objective_history: Vec<f64>,
}

/// `F_mu(theta) = <mu, theta> - Phi(theta)`.
pub fn objective_f(model: &HardcoreModel, mu: &[f64], theta: &[f64]) -> Result<f64> {
    if mu.len() != model.p() {
        return Err(Error::Dimension {
            expected: model.p(),
            got: mu.len(),
        });
    }
    Ok(dot(mu, theta) - model.log_partition(theta)?)
}

pub fn backward_map(model: &HardcoreModel, mu: &MeanParams, tol: f64) -> Result<BackwardSolution> {
    let settings = NewtonSettings {
        tol,
        ..NewtonSettings::default()
    };
    backward_map_with(model, mu, &settings)
}

pub fn backward_map_with(
    model: &HardcoreModel,
    mu: &MeanParams,
    settings: &NewtonSettings,
) -> Result<BackwardSolution> {
    let p = model.p();
    if mu.len() != p {
        return Err(Error::Dimension {
            expected: p,
            got: mu.len(),
        });
    }
    let mut theta = vec![0.0; p];
    let mut moments = model.moments(&theta, true)?;
    let mut f = -moments.log_partition;
    let mut history = vec![f];
    let mut grad = vec![0.0; p];
    for iter in 0..settings.max_iter {
        for i in 0..p {
            grad[i] = mu[i] - moments.mu[i];
        }
        let grad_norm = sup_norm(&grad);
        let cov = moments.cov.as_ref().expect("requested");
        let dir = regularized_solve(cov, &grad, p)?;
        if grad_norm <= settings.tol && sup_norm(&dir) <= settings.step_tol {
            return Ok(BackwardSolution {
                theta: CanonicalParams::new(theta)?,
                iterations: iter,
                final_grad_norm: grad_norm,
                converged: true,
                objective_history: history,
            });
        }
        let l1: f64 = dir.iter().map(|d| d.abs()).sum();
        if recession_slope(model, mu, &dir) >= -settings.recession_tol * l1 {
            return Err(Error::Divergence {
                iterations: iter,
                theta_norm: sup_norm(&theta),
            });
        }

        let slope = dot(&grad, &dir);
        let mut t = 1.0;
        let mut candidate = vec![0.0; p];
        loop {
            for i in 0..p {
                candidate[i] = theta[i] + t * dir[i];
            }
            let cand = model.moments(&candidate, true)?;
            let lin = dot(mu, &candidate);
            let f_new = lin - cand.log_partition;
            // Rounding in the difference of two large terms.
            let noise = 1e-14 * (1.0 + lin.abs() + cand.log_partition.abs());
            if f_new >= f + settings.armijo * t * slope - noise {
                theta.copy_from_slice(&candidate);
                moments = cand;
                f = f_new;
                history.push(f);
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return Err(Error::NotConverged {
                    iterations: iter,
                    grad_norm,
                });
            }
        }
        let norm = sup_norm(&theta);
        if norm > settings.theta_cap {
            return Err(Error::Divergence {
                iterations: iter + 1,
                theta_norm: norm,
            });
        }
    }
    let grad_norm = mu
        .iter()
        .zip(&moments.mu)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Err(Error::NotConverged {
        iterations: settings.max_iter,
        grad_norm,
    })
}

/// `<mu, d> - max_sigma <sigma, d>`: the asymptotic slope of `F_mu` along
/// `d`. Strictly negative for every `d != 0` iff `mu` is interior.
fn recession_slope(model: &HardcoreModel, mu: &[f64], dir: &[f64]) -> f64 {
    let support = model
        .family()
        .sets()
        .iter()
        .map(|&s| dot_mask(dir, s))
        .fold(f64::NEG_INFINITY, f64::max);
    dot(mu, dir) - support
}

/// Solves `(cov + rho I) x = b`, raising `rho` from 0 through 1e-10, 1e-9, ...
/// until the Cholesky factorization succeeds.
fn regularized_solve(cov: &[f64], b: &[f64], p: usize) -> Result<Vec<f64>> {
    let scale = (0..p)
        .map(|i| cov[i * p + i])
        .fold(0.0, f64::max)
        .max(1e-300);
    let mut rho = 0.0;
    loop {
        if let Some(x) = cholesky_solve(cov, b, p, rho, scale) {
            return Ok(x);
        }
        rho = if rho == 0.0 { 1e-10 } else { rho * 10.0 };
        if rho > 1.0 {
            return Err(Error::SingularHessian { rho });
        }
    }
}

fn cholesky_solve(a: &[f64], b: &[f64], n: usize, rho: f64, scale: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            if i == j {
                s += rho;
            }
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 1e-14 * scale {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * n + i];
    }
    Some(x)
}

pub(crate) fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// A first-order oracle for `grad Phi*(x) = theta(x)`.
pub trait BackwardOracle {
    fn query(&mut self, x: &[f64]) -> Result<Vec<f64>>;

    /// Number of queries answered so far.
    fn calls(&self) -> u64;
}

/// Exact backward mapping through the Newton solver.
pub struct ExactOracle<'a> {
    model: &'a HardcoreModel,
    tol: f64,
    calls: u64,
}

impl<'a> ExactOracle<'a> {
    pub fn new(model: &'a HardcoreModel) -> Self {
        ExactOracle {
            model,
            tol: DEFAULT_TOLERANCE,
            calls: 0,
        }
    }
}

impl BackwardOracle for ExactOracle<'_> {
    fn query(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        self.calls += 1;
        let mu = MeanParams::new(x.to_vec())?;
        Ok(backward_map(self.model, &mu, self.tol)?.theta.into_inner())
    }

    fn calls(&self) -> u64 {
        self.calls
    }
}

/// Returns the zero vector everywhere.
#[derive(Default)]
pub struct ZeroOracle {
    calls: u64,
}

impl BackwardOracle for ZeroOracle {
    fn query(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        self.calls += 1;
        Ok(vec![0.0; x.len()])
    }

    fn calls(&self) -> u64 {
        self.calls
    }
}

/// Noise level and seed of a [`NoisyOracle`].
#[derive(Clone, Copy, Debug, Serialize)]
pub struct OracleSpec {
    pub gamma: f64,
    pub seed: u64,
}

/// Exact `theta(x)` with every entry multiplied by an independent factor
/// uniform on `[1 - gamma, 1 + gamma]`.
///
/// `p` uniforms are drawn per query even when `gamma = 0`, so runs that share
/// a seed see the same underlying draws at every noise level.
pub struct NoisyOracle<'a> {
    model: &'a HardcoreModel,
    spec: OracleSpec,
    rng: ChaCha8Rng,
    tol: f64,
    calls: u64,
}

impl<'a> NoisyOracle<'a> {
    pub fn new(model: &'a HardcoreModel, spec: OracleSpec) -> Result<Self> {
        if !(0.0..1.0).contains(&spec.gamma) {
            return Err(Error::InvalidArgument(format!(
                "oracle error level {} outside [0, 1)",
                spec.gamma
            )));
        }
        Ok(NoisyOracle {
            model,
            spec,
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            tol: DEFAULT_TOLERANCE,
            calls: 0,
        })
    }

    pub fn spec(&self) -> OracleSpec {
        self.spec
    }
}

impl BackwardOracle for NoisyOracle<'_> {
    fn query(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        self.calls += 1;
        let mu = MeanParams::new(x.to_vec())?;
        let theta = backward_map(self.model, &mu, self.tol)?.theta.into_inner();
        let gamma = self.spec.gamma;
        let noisy: Vec<f64> = theta
            .iter()
            .map(|&t| t * (1.0 + gamma * self.rng.gen_range(-1.0..=1.0)))
            .collect();
        debug_assert!(noisy
            .iter()
            .zip(&theta)
            .all(|(h, t)| (h - t).abs() <= gamma * t.abs() * (1.0 + 1e-12)));
        Ok(noisy)
    }

    fn calls(&self) -> u64 {
        self.calls
    }
}

/// `|estimate - exact| <= delta |exact|` entrywise.
pub fn is_delta_approximation(estimate: &[f64], exact: &[f64], delta: f64) -> bool {
    estimate.len() == exact.len()
        && estimate
            .iter()
            .zip(exact)
            .all(|(e, x)| (e - x).abs() <= delta * x.abs())
}

/// Coordinatewise median over an odd number of independent runs of a
/// randomized estimator.
pub struct MedianAmplified<F> {
    estimator: F,
    repetitions: usize,
}

pub fn median_amplify<F>(estimator: F, repetitions: usize) -> Result<MedianAmplified<F>>
where
    F: FnMut() -> Result<Vec<f64>>,
{
    if repetitions == 0 || repetitions % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "median amplification needs an odd repetition count, got {repetitions}"
        )));
    }
    Ok(MedianAmplified {
        estimator,
        repetitions,
    })
}

impl<F> MedianAmplified<F>
where
    F: FnMut() -> Result<Vec<f64>>,
{
    pub fn estimate(&mut self) -> Result<Vec<f64>> {
        let runs = (0..self.repetitions)
            .map(|_| (self.estimator)())
            .collect::<Result<Vec<_>>>()?;
        coordinatewise_median(&runs)
    }
}

pub fn coordinatewise_median(runs: &[Vec<f64>]) -> Result<Vec<f64>> {
    let dim = runs.first().map_or(0, Vec::len);
    if let Some(bad) = runs.iter().find(|r| r.len() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            got: bad.len(),
        });
    }
    Ok((0..dim)
        .map(|i| {
            let mut col: Vec<f64> = runs.iter().map(|r| r[i]).collect();
            col.sort_by(f64::total_cmp);
            col[col.len() / 2]
        })
        .collect())
}
