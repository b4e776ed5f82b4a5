//! Executable checks of the bounds the reduction relies on.
//!
//! Every check recomputes what it needs (enumeration, LP membership, Newton
//! solves) and reports how many samples actually exercised the claim versus
//! passing vacuously because a hypothesis failed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::backward::{backward_map, NoisyOracle, OracleSpec, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::graph::{enumerate_independent_sets, generate_graph, Graph, GraphKind};
use crate::inference::{dot, HardcoreModel, MeanParams};
use crate::polytope::{
    constraint_status, enumerate_facets, headroom, in_hull, shrunken_membership, ConstraintKind,
    ConstraintStatus, HalfspaceConstraint, ReductionConfig, FACET_CAP, MEMBERSHIP_TOLERANCE,
};
use crate::reduction::{
    projected_gradient_from, projected_threshold_gradient, Projector, ReductionTrace,
};
use crate::seeds::derive_seed;

/// Slack granted to floating-point comparisons of exact identities.
const FP_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub input: Vec<f64>,
    pub detail: String,
    pub bound: f64,
    pub observed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub graph: String,
    pub samples: usize,
    /// Samples whose hypotheses held, so the conclusion was tested.
    pub verified: usize,
    /// Samples that passed only because a hypothesis failed.
    pub vacuous: usize,
    /// Samples dropped before testing (e.g. outside the polytope interior).
    pub skipped: usize,
    pub violations: Vec<Violation>,
    pub notes: Vec<String>,
    pub passed: bool,
}

impl CheckReport {
    pub fn new(check: &str, graph: &str) -> Self {
        CheckReport {
            check: check.to_string(),
            graph: graph.to_string(),
            samples: 0,
            verified: 0,
            vacuous: 0,
            skipped: 0,
            violations: Vec::new(),
            notes: Vec::new(),
            passed: true,
        }
    }

    fn violate(&mut self, input: &[f64], detail: impl Into<String>, bound: f64, observed: f64) {
        self.violations.push(Violation {
            input: input.to_vec(),
            detail: detail.into(),
            bound,
            observed,
        });
        self.passed = false;
    }

    fn note(&mut self, note: impl Into<String>) {
        let note = note.into();
        if !self.notes.contains(&note) {
            self.notes.push(note);
        }
    }

    /// Folds another report of the same check into this one.
    pub fn absorb(&mut self, other: CheckReport) {
        self.samples += other.samples;
        self.verified += other.verified;
        self.vacuous += other.vacuous;
        self.skipped += other.skipped;
        self.violations.extend(other.violations);
        for n in other.notes {
            self.note(n);
        }
        self.passed = self.violations.is_empty();
    }
}

fn graph_label(model: &HardcoreModel) -> String {
    model.graph().descriptor()
}

/// `lambda_c(d) = (d-1)^(d-1) / (d-2)^d`, the uniqueness threshold on the
/// `d`-regular tree.
pub fn critical_fugacity(d: u32) -> Result<f64> {
    if d < 3 {
        return Err(Error::InvalidArgument(format!(
            "critical fugacity needs degree >= 3, got {d}"
        )));
    }
    let a = (d - 1) as f64;
    let b = (d - 2) as f64;
    Ok(a.powi(d as i32 - 1) / b.powi(d as i32))
}

/// If `mu_i + nu_i >= 1 - delta` and `nu_i <= 1 - zeta delta` with
/// `zeta > 1`, then `theta_i >= ln(zeta - 1)`.
pub fn check_lemma9(
    model: &HardcoreModel,
    theta: &[f64],
    node: usize,
    delta: f64,
    zeta: f64,
) -> Result<CheckReport> {
    let mut r = CheckReport::new("lemma9_threshold", &graph_label(model));
    if !(zeta > 1.0) || !(delta > 0.0) {
        return Err(Error::InvalidArgument("need zeta > 1 and delta > 0".into()));
    }
    let c = model.class_probabilities(theta, node)?;
    r.samples = 1;
    let hypotheses = c.p_in + c.p_conflict >= 1.0 - delta && c.p_conflict <= 1.0 - zeta * delta;
    if !hypotheses {
        r.vacuous = 1;
        return Ok(r);
    }
    r.verified = 1;
    let bound = (zeta - 1.0).ln();
    if theta[node] < bound - FP_SLACK * (1.0 + bound.abs()) {
        let mut input = theta.to_vec();
        input.extend([node as f64 + 1.0, delta, zeta]);
        r.violate(&input, "theta_i below ln(zeta - 1)", bound, theta[node]);
    }
    Ok(r)
}

/// `f(S_i) = e^{theta_i} f(S_i^-)`: adding `i` to an addable set multiplies
/// its weight by the fugacity.
pub fn check_class_identity(
    model: &HardcoreModel,
    theta: &[f64],
    node: usize,
) -> Result<CheckReport> {
    let mut r = CheckReport::new("class_identity", &graph_label(model));
    let (f_in, f_add, _) = model.class_weights(theta, node)?;
    r.samples = 1;
    r.verified = 1;
    let expected = theta[node].exp() * f_add;
    if (f_in - expected).abs() > 1e-12 * expected.abs().max(f_in.abs()) + f64::MIN_POSITIVE {
        r.violate(theta, format!("node {}", node + 1), expected, f_in);
    }
    Ok(r)
}

/// If `mu` is in the shrunken polytope and `mu + r eps e_i` leaves `M`, then
/// `theta_i(mu) >= ln(q/r - 1)`.
pub fn check_lemma10_critical_coordinate(
    model: &HardcoreModel,
    mu: &[f64],
    node: usize,
    r_factor: f64,
    cfg: &ReductionConfig,
) -> Result<CheckReport> {
    let mut r = CheckReport::new("lemma10_critical_coordinate", &graph_label(model));
    if !(r_factor > 0.0) {
        return Err(Error::InvalidArgument("r must be positive".into()));
    }
    let family = model.family();
    r.samples = 1;
    if !shrunken_membership(family, mu, cfg)? {
        r.vacuous = 1;
        return Ok(r);
    }
    let mut pushed = mu.to_vec();
    pushed[node] += r_factor * cfg.epsilon;
    if in_hull(family, &pushed, MEMBERSHIP_TOLERANCE)? {
        r.vacuous = 1;
        return Ok(r);
    }
    let theta = match backward_map(model, &MeanParams::new(mu.to_vec())?, DEFAULT_TOLERANCE) {
        Ok(sol) => sol.theta.into_inner(),
        Err(e) => {
            r.skipped = 1;
            r.samples = 0;
            r.note(format!("backward solve failed: {e}"));
            return Ok(r);
        }
    };
    r.verified = 1;
    let ratio = cfg.q / r_factor - 1.0;
    if ratio > 0.0 {
        let bound = ratio.ln();
        if theta[node] < bound - FP_SLACK * (1.0 + bound.abs()) {
            let mut input = mu.to_vec();
            input.extend([node as f64 + 1.0, r_factor]);
            r.violate(&input, "theta_i below ln(q/r - 1)", bound, theta[node]);
        }
    }
    Ok(r)
}

/// Random `theta` with entries uniform on `[-a, a]`, `a` itself uniform on
/// `[0.5, max_scale]`.
fn random_theta(rng: &mut ChaCha8Rng, p: usize, max_scale: f64) -> Vec<f64> {
    let a = rng.gen_range(0.5..=max_scale);
    (0..p).map(|_| rng.gen_range(-a..=a)).collect()
}

/// Draws points of the shrunken polytope by forward-mapping random `theta`
/// and rejecting. Every fourth point has one coordinate lowered exactly to
/// the floor, which keeps it in the shrunken polytope.
pub fn sample_shrunken_points(
    model: &HardcoreModel,
    n: usize,
    cfg: &ReductionConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>> {
    let family = model.family();
    let p = model.p();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n && attempts < 200 * n.max(1) {
        attempts += 1;
        let theta = random_theta(rng, p, 8.0);
        let mut mu = model.marginals(&theta)?.into_inner();
        if out.len() % 4 == 3 {
            let i = rng.gen_range(0..p);
            mu[i] = mu[i].min(cfg.floor());
        }
        if shrunken_membership(family, &mu, cfg)? {
            out.push(mu);
        }
    }
    if out.is_empty() && n > 0 {
        return Err(Error::SamplerStarvation(format!(
            "no shrunken-polytope point in {attempts} draws on {}",
            graph_label(model)
        )));
    }
    Ok(out)
}

/// `-p/(q eps) <= theta_i(x) <= p/eps` on sampled points of the shrunken
/// polytope.
pub fn check_gradient_bounds(
    model: &HardcoreModel,
    n_samples: usize,
    cfg: &ReductionConfig,
    seed: u64,
) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = CheckReport::new("gradient_bounds", &graph_label(model));
    let pts = sample_shrunken_points(model, n_samples, cfg, &mut rng)?;
    if pts.len() < n_samples {
        r.note(format!("sampler found {} of {n_samples} points", pts.len()));
    }
    check_gradient_bounds_at(model, &pts, cfg, &mut r)?;
    Ok(r)
}

fn check_gradient_bounds_at(
    model: &HardcoreModel,
    pts: &[Vec<f64>],
    cfg: &ReductionConfig,
    r: &mut CheckReport,
) -> Result<()> {
    let p = model.p() as f64;
    let upper = p / cfg.epsilon;
    let lower = -p / cfg.floor();
    for x in pts {
        r.samples += 1;
        let theta = match backward_map(model, &MeanParams::new(x.clone())?, DEFAULT_TOLERANCE) {
            Ok(sol) => sol.theta.into_inner(),
            Err(e) => {
                r.samples -= 1;
                r.skipped += 1;
                r.note(format!("backward solve failed: {e}"));
                continue;
            }
        };
        r.verified += 1;
        for &t in &theta {
            if t > upper {
                r.violate(x, "theta_i above p/eps", upper, t);
            }
            if t < lower {
                r.violate(x, "theta_i below -p/(q eps)", lower, t);
            }
        }
    }
    Ok(())
}

/// `Phi*(x + D) - Phi*(x) >= <theta(x), D> + |D|^2 / (2 p^{3/2})` on pairs
/// of forward-mapped points, together with
/// `|mu(t) - mu(t')| <= p^{3/2} |t - t'|`.
pub fn check_strong_convexity(
    model: &HardcoreModel,
    n_pairs: usize,
    seed: u64,
) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = CheckReport::new("strong_convexity", &graph_label(model));
    let p = model.p();
    let modulus = (p as f64).powf(-1.5);
    let lipschitz = (p as f64).powf(1.5);
    for k in 0..n_pairs {
        let t1 = random_theta(&mut rng, p, 3.0);
        // Every other pair is close, where the quadratic term dominates.
        let t2: Vec<f64> = if k % 2 == 0 {
            random_theta(&mut rng, p, 3.0)
        } else {
            t1.iter().map(|v| v + rng.gen_range(-0.05..=0.05)).collect()
        };
        let x = model.marginals(&t1)?.into_inner();
        let y = model.marginals(&t2)?.into_inner();
        r.samples += 1;
        let solved = (|| -> Result<(Vec<f64>, f64, f64)> {
            let th = backward_map(model, &MeanParams::new(x.clone())?, DEFAULT_TOLERANCE)?;
            let fx = model.conjugate_dual(&MeanParams::new(x.clone())?)?;
            let fy = model.conjugate_dual(&MeanParams::new(y.clone())?)?;
            Ok((th.theta.into_inner(), fx, fy))
        })();
        let (theta_x, fx, fy) = match solved {
            Ok(v) => v,
            Err(e) => {
                r.samples -= 1;
                r.skipped += 1;
                r.note(format!("pair outside the interior: {e}"));
                continue;
            }
        };
        r.verified += 1;
        let d: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        let d2: f64 = d.iter().map(|v| v * v).sum();
        let lhs = fy - fx;
        let rhs = dot(&theta_x, &d) + 0.5 * modulus * d2;
        if lhs < rhs - FP_SLACK * (1.0 + fx.abs() + fy.abs()) {
            let mut input = x.clone();
            input.extend(&y);
            r.violate(&input, "strong convexity", rhs, lhs);
        }
        let dt: f64 = t1
            .iter()
            .zip(&t2)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let dm = d2.sqrt();
        if dm > lipschitz * dt * (1.0 + 1e-12) {
            let mut input = t1.clone();
            input.extend(&t2);
            r.violate(&input, "gradient Lipschitz", lipschitz * dt, dm);
        }
    }
    Ok(r)
}

/// `mu_i(0) >= 2^{-d-1}` always, and `mu(0)` in the shrunken polytope when
/// `p >= 2^{d+1}`.
pub fn check_mu_zero_in_m1(model: &HardcoreModel, cfg: &ReductionConfig) -> Result<CheckReport> {
    let mut r = CheckReport::new("mu_zero_in_shrunken", &graph_label(model));
    let g = model.graph();
    let p = g.p();
    let d = g.max_degree();
    let mu = model.marginals(&vec![0.0; p])?.into_inner();
    let floor_bound = 0.5f64.powi(d as i32 + 1);
    for &m in &mu {
        r.samples += 1;
        r.verified += 1;
        if m < floor_bound {
            r.violate(&mu, "mu_i(0) below 2^(-d-1)", floor_bound, m);
        }
    }
    r.samples += 1;
    let hypothesis = d < 63 && p as u64 >= 1u64 << (d + 1);
    let inside = shrunken_membership(model.family(), &mu, cfg)?;
    if hypothesis {
        r.verified += 1;
        if !inside {
            r.violate(&mu, "mu(0) outside the shrunken polytope", 1.0, 0.0);
        }
    } else {
        r.vacuous += 1;
        r.note(format!(
            "hypothesis p >= 2^(d+1) not met (p = {p}, d = {d}); mu(0) {} the shrunken polytope",
            if inside { "is in" } else { "is not in" }
        ));
    }
    Ok(r)
}

/// Along a trace: a facet inactive at `x^t` is not critical at `x^{t+1}`, an
/// active facet does not gain (`<h, x^{t+1}> <= <h, x^t> + 1e-12`), and no
/// iterate has a critical facet.
pub fn check_repulsion(
    trace: &ReductionTrace,
    facets: &[HalfspaceConstraint],
    cfg: &ReductionConfig,
) -> CheckReport {
    let mut r = CheckReport::new("repulsion", &format!("p={}", cfg.p));
    let upper: Vec<&HalfspaceConstraint> = facets
        .iter()
        .filter(|f| f.kind == ConstraintKind::Facet)
        .collect();
    for (t, x) in trace.iterates.iter().enumerate() {
        for h in &upper {
            if constraint_status(h, x, cfg) == ConstraintStatus::Critical {
                r.violate(
                    x,
                    format!("critical facet {:?} at step {}", h.h, t + 1),
                    h.offset - cfg.epsilon * h.sup_norm(),
                    h.value(x),
                );
            }
        }
    }
    for (t, pair) in trace.iterates.windows(2).enumerate() {
        let (x, next) = (&pair[0], &pair[1]);
        for h in &upper {
            r.samples += 1;
            match constraint_status(h, x, cfg) {
                ConstraintStatus::Inactive => {
                    r.vacuous += 1;
                    if constraint_status(h, next, cfg) == ConstraintStatus::Critical {
                        r.violate(
                            next,
                            format!("inactive facet {:?} became critical at step {}", h.h, t + 2),
                            h.offset - cfg.epsilon * h.sup_norm(),
                            h.value(next),
                        );
                    }
                }
                ConstraintStatus::Active => {
                    r.verified += 1;
                    let (before, after) = (h.value(x), h.value(next));
                    if after > before + 1e-12 {
                        r.violate(
                            next,
                            format!("active facet {:?} moved closer at step {}", h.h, t + 2),
                            before,
                            after,
                        );
                    }
                }
                ConstraintStatus::Critical => {}
            }
        }
    }
    r
}

/// At a shrunken-polytope point with an active facet, some coordinate `l`
/// has `x + 4 p eps e_l` outside `M` and `x_l >= 2 q eps`.
pub fn check_good_coordinate(
    model: &HardcoreModel,
    x: &[f64],
    facets: &[HalfspaceConstraint],
    cfg: &ReductionConfig,
) -> Result<CheckReport> {
    let mut r = CheckReport::new("good_coordinate", &graph_label(model));
    let family = model.family();
    r.samples = 1;
    if model.p() < 2 {
        // The constant schedule needs p >= 2; at p = 1 the desk floor is 1/2
        // and `x_l >= 2 q eps = 1` cannot hold inside the shrunken polytope.
        r.vacuous = 1;
        r.note("standing assumption p >= 2 not met");
        return Ok(r);
    }
    let active = facets
        .iter()
        .any(|h| constraint_status(h, x, cfg) == ConstraintStatus::Active);
    if !active || !shrunken_membership(family, x, cfg)? {
        r.vacuous = 1;
        return Ok(r);
    }
    r.verified = 1;
    let push = 4.0 * model.p() as f64 * cfg.epsilon;
    let mut y = x.to_vec();
    let mut found = false;
    for l in 0..x.len() {
        if x[l] < 2.0 * cfg.floor() {
            continue;
        }
        y[l] += push;
        let outside = !in_hull(family, &y, MEMBERSHIP_TOLERANCE)?;
        y[l] = x[l];
        if outside {
            found = true;
            break;
        }
    }
    if !found {
        r.violate(x, "no coordinate qualifies", 1.0, 0.0);
    }
    Ok(r)
}

/// Moves a shrunken-polytope point so that a random facet becomes active,
/// keeping it in the shrunken polytope. Returns `None` after repeated misses.
pub fn sample_active_point(
    model: &HardcoreModel,
    facets: &[HalfspaceConstraint],
    cfg: &ReductionConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Option<Vec<f64>>> {
    let upper: Vec<&HalfspaceConstraint> = facets
        .iter()
        .filter(|f| f.kind == ConstraintKind::Facet)
        .collect();
    if upper.is_empty() {
        return Ok(None);
    }
    for _ in 0..200 {
        let base = sample_shrunken_points(model, 1, cfg, rng)?;
        let x = &base[0];
        let h = upper[rng.gen_range(0..upper.len())];
        let target = h.offset - cfg.epsilon * h.sup_norm() * rng.gen_range(1.02..1.98);
        let hh = dot(&h.h, &h.h);
        let shift = (target - h.value(x)) / hh;
        let y: Vec<f64> = x.iter().zip(&h.h).map(|(a, b)| a + shift * b).collect();
        if shrunken_membership(model.family(), &y, cfg)? {
            return Ok(Some(y));
        }
    }
    Ok(None)
}

fn lemma9_sweep(model: &HardcoreModel, n: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = CheckReport::new("lemma9_threshold", &graph_label(model));
    let p = model.p();
    let mut drawn = 0;
    let mut attempts = 0;
    while drawn < n && attempts < 100 * n {
        attempts += 1;
        let theta = random_theta(&mut rng, p, 8.0);
        let i = rng.gen_range(0..p);
        let c = model.class_probabilities(&theta, i)?;
        // delta just above the addable mass, zeta inside the admissible range.
        let a = c.p_addable;
        if !(a > 1e-300) {
            continue;
        }
        let eta = (0.5 * c.p_in / a).min(0.01);
        let delta = a * (1.0 + eta);
        let zeta_max = (1.0 - c.p_conflict) / delta;
        if !(zeta_max > 1.0) {
            continue;
        }
        let zeta = 1.0 + rng.gen_range(0.0..0.999) * (zeta_max - 1.0);
        if zeta <= 1.0 {
            continue;
        }
        drawn += 1;
        total.absorb(check_lemma9(model, &theta, i, delta, zeta)?);
        total.absorb(check_class_identity(model, &theta, i)?.renamed("lemma9_threshold"));
    }
    Ok(total)
}

impl CheckReport {
    fn renamed(mut self, check: &str) -> Self {
        // Identity samples fold into the threshold report without inflating
        // its sample count.
        self.check = check.to_string();
        self.samples = 0;
        self.verified = 0;
        self
    }
}

fn lemma10_sweep(
    model: &HardcoreModel,
    n: usize,
    cfg: &ReductionConfig,
    seed: u64,
) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = CheckReport::new("lemma10_critical_coordinate", &graph_label(model));
    let family = model.family();
    let p = model.p();
    let mut drawn = 0;
    let mut attempts = 0;
    while drawn < n && attempts < 100 * n {
        attempts += 1;
        let base = sample_shrunken_points(model, 1, cfg, &mut rng)?;
        let mut mu = base[0].clone();
        let i = rng.gen_range(0..p);
        let Some(room) = headroom(family, &mu, i)? else {
            continue;
        };
        // Slide along e_i so the headroom lands in [eps, 1.5 eps].
        let target = cfg.epsilon * rng.gen_range(1.0..1.5);
        mu[i] += room - target;
        if mu[i] < cfg.floor() || !shrunken_membership(family, &mu, cfg)? {
            continue;
        }
        let r = (target / cfg.epsilon) * (1.0 + rng.gen_range(0.001..0.3));
        drawn += 1;
        total.absorb(check_lemma10_critical_coordinate(model, &mu, i, r, cfg)?);
    }
    if drawn < n {
        total.note(format!("near-facet sampler produced {drawn} of {n} points"));
    }
    Ok(total)
}

fn good_coordinate_sweep(
    model: &HardcoreModel,
    facets: &[HalfspaceConstraint],
    n: usize,
    cfg: &ReductionConfig,
    seed: u64,
) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = CheckReport::new("good_coordinate", &graph_label(model));
    let mut drawn = 0;
    for _ in 0..n {
        if let Some(x) = sample_active_point(model, facets, cfg, &mut rng)? {
            drawn += 1;
            total.absorb(check_good_coordinate(model, &x, facets, cfg)?);
        }
    }
    if drawn < n {
        total.note(format!(
            "active-point sampler produced {drawn} of {n} points"
        ));
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Default,
    Fast,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(Suite::Default),
            "fast" => Ok(Suite::Fast),
            other => Err(Error::InvalidArgument(format!("unknown suite `{other}`"))),
        }
    }
}

struct SuiteShape {
    graphs: Vec<(String, Graph)>,
    seeds: u64,
    samples: usize,
    trace_iterations: usize,
    gamma: f64,
}

fn suite_shape(suite: Suite, seed: u64) -> Result<SuiteShape> {
    let mut graphs: Vec<(String, Graph)> = Vec::new();
    let mut add = |name: String, kind: GraphKind, p: usize, s: u64| -> Result<()> {
        graphs.push((name, generate_graph(kind, p, s)?));
        Ok(())
    };
    match suite {
        Suite::Default => {
            for p in 2..=10 {
                add(format!("path-{p}"), GraphKind::Path, p, 0)?;
            }
            for p in 3..=10 {
                add(format!("cycle-{p}"), GraphKind::Cycle, p, 0)?;
            }
            for p in [4, 5, 6, 7, 8] {
                for k in 0..2u64 {
                    let s = derive_seed(seed, &[0xE5, p as u64, k]);
                    add(
                        format!("random-{p}-{k}"),
                        GraphKind::ErdosRenyi { edge_prob: 0.4 },
                        p,
                        s,
                    )?;
                }
            }
            add(
                "regular3-6".into(),
                GraphKind::RandomRegular { degree: 3 },
                6,
                derive_seed(seed, &[0x33, 6]),
            )?;
            add(
                "regular3-8".into(),
                GraphKind::RandomRegular { degree: 3 },
                8,
                derive_seed(seed, &[0x33, 8]),
            )?;
            add("single".into(), GraphKind::Empty, 1, 0)?;
            add("complete-3".into(), GraphKind::Complete, 3, 0)?;
            add("complete-4".into(), GraphKind::Complete, 4, 0)?;
            add("star-5".into(), GraphKind::Star, 6, 0)?;
            add("empty-4".into(), GraphKind::Empty, 4, 0)?;
            Ok(SuiteShape {
                graphs,
                seeds: 20,
                samples: 10,
                trace_iterations: 50,
                gamma: 0.05,
            })
        }
        Suite::Fast => {
            add("path-2".into(), GraphKind::Path, 2, 0)?;
            add("path-3".into(), GraphKind::Path, 3, 0)?;
            add("cycle-4".into(), GraphKind::Cycle, 4, 0)?;
            add("cycle-5".into(), GraphKind::Cycle, 5, 0)?;
            add("complete-3".into(), GraphKind::Complete, 3, 0)?;
            add(
                "random-5".into(),
                GraphKind::ErdosRenyi { edge_prob: 0.4 },
                5,
                derive_seed(seed, &[0xE5, 5, 0]),
            )?;
            Ok(SuiteShape {
                graphs,
                seeds: 3,
                samples: 4,
                trace_iterations: 20,
                gamma: 0.05,
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckSummary {
    pub check: String,
    pub samples: usize,
    pub verified: usize,
    pub vacuous: usize,
    pub skipped: usize,
    pub violations: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub summary: Vec<CheckSummary>,
    pub reports: Vec<CheckReport>,
    pub passed: bool,
}

impl SuiteReport {
    pub fn summary_for(&self, check: &str) -> Option<&CheckSummary> {
        self.summary.iter().find(|s| s.check == check)
    }
}

fn run_cell(
    name: &str,
    model: &HardcoreModel,
    facets: Option<&[HalfspaceConstraint]>,
    shape: &SuiteShape,
    seed: u64,
    graph_index: u64,
    k: u64,
) -> Result<Vec<CheckReport>> {
    let p = model.p();
    let cfg = ReductionConfig::desk(p, shape.trace_iterations)?.with_gamma(shape.gamma)?;
    let cell = |tag: u64| derive_seed(seed, &[graph_index, k, tag]);
    let n = shape.samples;
    let mut out = vec![
        check_gradient_bounds(model, n, &cfg, cell(1))?,
        check_strong_convexity(model, n, cell(2))?,
        lemma9_sweep(model, n, cell(3))?,
        lemma10_sweep(model, n, &cfg, cell(4))?,
    ];
    if k == 0 {
        out.push(check_mu_zero_in_m1(model, &cfg)?);
    }
    if let Some(f) = facets {
        out.push(good_coordinate_sweep(model, f, n, &cfg, cell(5))?);
        let mut oracle = NoisyOracle::new(
            model,
            OracleSpec {
                gamma: shape.gamma,
                seed: cell(6),
            },
        )?;
        let trace = projected_threshold_gradient(&mut oracle, &cfg)?;
        let mut rep = check_repulsion(&trace, f, &cfg);
        if let Some(fail) = &trace.failure {
            rep.note(format!("trace stopped early: {}", fail.message));
        }
        // A second trace started next to a facet, where the clauses bite.
        let mut rng = ChaCha8Rng::seed_from_u64(cell(7));
        if let Some(start) = sample_active_point(model, f, &cfg, &mut rng)? {
            let mut oracle = NoisyOracle::new(
                model,
                OracleSpec {
                    gamma: shape.gamma,
                    seed: cell(8),
                },
            )?;
            let trace = projected_gradient_from(&mut oracle, &cfg, start, Projector::Threshold)?;
            rep.absorb(check_repulsion(&trace, f, &cfg));
        }
        out.push(rep);
    }
    for rep in out.iter_mut() {
        rep.graph = name.to_string();
    }
    Ok(out)
}

/// Runs every check over the suite's graph and seed grid. Cells run in
/// parallel; results are aggregated in grid order, so the report does not
/// depend on scheduling.
pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport> {
    let shape = suite_shape(suite, seed)?;
    let mut prepared = Vec::new();
    for (name, g) in &shape.graphs {
        let model = HardcoreModel::new(g)?;
        let facets = if g.p() <= FACET_CAP {
            Some(enumerate_facets(&enumerate_independent_sets(g)?)?)
        } else {
            None
        };
        prepared.push((name.clone(), model, facets));
    }
    let cells: Vec<(usize, u64)> = (0..prepared.len())
        .flat_map(|gi| (0..shape.seeds).map(move |k| (gi, k)))
        .collect();
    let results: Vec<Vec<CheckReport>> = cells
        .par_iter()
        .map(|&(gi, k)| {
            let (name, model, facets) = &prepared[gi];
            run_cell(name, model, facets.as_deref(), &shape, seed, gi as u64, k)
        })
        .collect::<Result<_>>()?;

    // One report per (check, graph), in first-seen order.
    let mut reports: Vec<CheckReport> = Vec::new();
    for rep in results.into_iter().flatten() {
        match reports
            .iter_mut()
            .find(|r| r.check == rep.check && r.graph == rep.graph)
        {
            Some(r) => r.absorb(rep),
            None => reports.push(rep),
        }
    }
    let mut summary: Vec<CheckSummary> = Vec::new();
    for rep in &reports {
        let s = match summary.iter_mut().find(|s| s.check == rep.check) {
            Some(s) => s,
            None => {
                summary.push(CheckSummary {
                    check: rep.check.clone(),
                    samples: 0,
                    verified: 0,
                    vacuous: 0,
                    skipped: 0,
                    violations: 0,
                    passed: true,
                });
                summary.last_mut().expect("just pushed")
            }
        };
        s.samples += rep.samples;
        s.verified += rep.verified;
        s.vacuous += rep.vacuous;
        s.skipped += rep.skipped;
        s.violations += rep.violations.len();
        s.passed &= rep.passed;
    }
    let passed = summary.iter().all(|s| s.passed);
    Ok(SuiteReport {
        suite,
        seed,
        summary,
        reports,
        passed,
    })
}
