//! Constant schedules for the thresholding reduction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// The asymptotic schedule `eps = p^-8`, `q = p^5`, `s = (eps / 2p)^2`.
    Paper,
    /// Desk-scale schedule: `eps = 1/(4p^2)`, `q = 2`, step from the
    /// averaged projected-gradient formula.
    Desk,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Mode::Paper),
            "desk" => Ok(Mode::Desk),
            other => Err(Error::InvalidArgument(format!("unknown mode `{other}`"))),
        }
    }
}

/// Constants governing the reduction. The floor of the shrunken polytope is
/// `q * epsilon`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionConfig {
    pub mode: Mode,
    pub p: usize,
    pub epsilon: f64,
    pub q: f64,
    /// Step size `s`.
    pub step: f64,
    pub gamma: f64,
    /// Iteration budget `T`.
    pub iterations: usize,
    /// Gradient bound `L` in the 2-norm, from `|theta|_inf <= p/eps`.
    pub lipschitz: f64,
    /// Distance bound `R` between the start point and the optimum.
    pub radius: f64,
    /// Objective accuracy promised by `(step, iterations)`, when the pair
    /// was chosen by the averaged-gradient formula.
    pub delta: Option<f64>,
}

/// Step size guaranteeing objective accuracy `delta` with gradient bound `l`.
pub fn averaged_gradient_step(delta: f64, l: f64) -> f64 {
    delta / (2.0 * l * l)
}

/// Iterations needed for objective accuracy `delta` from distance `r`.
pub fn averaged_gradient_iterations(r: f64, l: f64, delta: f64) -> f64 {
    (4.0 * r * r * l * l / (delta * delta)).ceil()
}

fn gradient_bounds(p: usize, epsilon: f64) -> (f64, f64) {
    let pf = p as f64;
    (pf.powf(1.5) / epsilon, pf.sqrt())
}

impl ReductionConfig {
    /// The asymptotic schedule. `gamma` starts at 0 and `iterations` at 1;
    /// callers set both.
    pub fn paper(p: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidArgument(
                "the asymptotic schedule needs p >= 2".into(),
            ));
        }
        let pf = p as f64;
        let epsilon = pf.powi(-8);
        let (lipschitz, radius) = gradient_bounds(p, epsilon);
        Ok(ReductionConfig {
            mode: Mode::Paper,
            p,
            epsilon,
            q: pf.powi(5),
            step: (epsilon / (2.0 * pf)).powi(2),
            gamma: 0.0,
            iterations: 1,
            lipschitz,
            radius,
            delta: None,
        })
    }

    /// Desk schedule with an iteration budget: `s = R / (L sqrt(T))`, which
    /// is the accuracy-optimal step for that budget, and `delta = 2RL/sqrt(T)`.
    pub fn desk(p: usize, iterations: usize) -> Result<Self> {
        let eps = 1.0 / (4.0 * (p as f64).powi(2));
        Self::desk_custom(p, eps, 2.0, iterations)
    }

    pub fn desk_custom(p: usize, epsilon: f64, q: f64, iterations: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidArgument("p must be positive".into()));
        }
        let (lipschitz, radius) = gradient_bounds(p, epsilon);
        let mut cfg = ReductionConfig {
            mode: Mode::Desk,
            p,
            epsilon,
            q,
            step: 0.0,
            gamma: 0.0,
            iterations,
            lipschitz,
            radius,
            delta: None,
        };
        cfg.rebalance();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Desk schedule targeting objective accuracy `delta` directly.
    pub fn desk_for_accuracy(p: usize, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidArgument("delta must be positive".into()));
        }
        let mut cfg = Self::desk(p, 1)?;
        let t = averaged_gradient_iterations(cfg.radius, cfg.lipschitz, delta);
        if t > 1e12 {
            return Err(Error::InvalidArgument(format!(
                "accuracy {delta} needs {t:e} iterations"
            )));
        }
        cfg.iterations = t as usize;
        cfg.step = averaged_gradient_step(delta, cfg.lipschitz);
        cfg.delta = Some(delta);
        Ok(cfg)
    }

    fn rebalance(&mut self) {
        if self.mode == Mode::Desk && self.iterations > 0 {
            let sqrt_t = (self.iterations as f64).sqrt();
            self.step = self.radius / (self.lipschitz * sqrt_t);
            self.delta = Some(2.0 * self.radius * self.lipschitz / sqrt_t);
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.gamma = gamma;
        self.validate()?;
        Ok(self)
    }

    /// Sets `T`; in desk mode the step and promised accuracy follow.
    pub fn with_iterations(mut self, iterations: usize) -> Result<Self> {
        self.iterations = iterations;
        self.rebalance();
        self.validate()?;
        Ok(self)
    }

    pub fn floor(&self) -> f64 {
        self.q * self.epsilon
    }

    /// The start point `(1/2p, ..., 1/2p)`.
    pub fn start_point(&self) -> Vec<f64> {
        vec![0.5 / self.p as f64; self.p]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(self.q > 1.0) {
            return bad("q must exceed 1");
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            return bad("step size must be positive");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if self.iterations < 1 {
            return bad("T must be at least 1");
        }
        if self.floor() > 0.5 / self.p as f64 {
            return bad("floor q*eps exceeds the start coordinate 1/2p");
        }
        Ok(())
    }

    /// Marginal error guaranteed by the reduction at noise `gamma`:
    /// `4 gamma p^{7/2} / (q eps^2)`.
    pub fn marginal_error_bound(&self) -> f64 {
        4.0 * self.gamma * (self.p as f64).powf(3.5) / (self.q * self.epsilon * self.epsilon)
    }

    /// Oracle-call count `1/(eps gamma^2)` quoted for the reduction.
    pub fn stated_oracle_calls(&self) -> f64 {
        1.0 / (self.epsilon * self.gamma * self.gamma)
    }

    /// Iteration count `1/gamma^2` used inside the reduction's argument.
    pub fn argued_iterations(&self) -> f64 {
        1.0 / (self.gamma * self.gamma)
    }
}
