mod common;

use common::{graph_strategy, sup_diff};
use hardcore::backward::{backward_map, ExactOracle, NoisyOracle, OracleSpec};
use hardcore::graph::{generate_graph, Graph, GraphKind};
use hardcore::polytope::{averaged_gradient_iterations, averaged_gradient_step, ReductionConfig};
use hardcore::reduction::{
    estimate_marginals_at_zero, estimate_partition_function,
    estimate_partition_function_via_reduction, exact_marginals_at_zero, generic_projected_gradient,
    projected_threshold_gradient,
};
use hardcore::{HardcoreModel, MeanParams};
use proptest::prelude::*;

struct Converged {
    average: Vec<f64>,
    mu0: Vec<f64>,
    gap: f64,
}

/// Averaged projected gradient on the dual with exact gradients, constants
/// chosen for objective accuracy `delta`.
fn run_to_accuracy(g: &Graph, delta: f64) -> Converged {
    let p = g.p();
    let model = HardcoreModel::new(g).unwrap();
    let cfg = ReductionConfig::desk(p, 1).unwrap();
    let floor = cfg.floor();
    let mu0 = model.marginals(&vec![0.0; p]).unwrap().into_inner();
    let x1 = cfg.start_point();
    let grad = |x: &[f64]| {
        Ok(backward_map(&model, &MeanParams::new(x.to_vec())?, 1e-10)?
            .theta
            .into_inner())
    };
    let l = grad(&x1).unwrap().iter().map(|v| v * v).sum::<f64>().sqrt();
    let r = sup_diff(&x1, &mu0) * (p as f64).sqrt();
    let t = averaged_gradient_iterations(r, l, delta) as usize;
    let run = generic_projected_gradient(
        grad,
        |y: &[f64]| y.iter().map(|v| v.max(floor)).collect(),
        &x1,
        averaged_gradient_step(delta, l),
        t,
    )
    .unwrap();
    assert!(
        run.max_grad_norm <= l * (1.0 + 1e-12),
        "gradient bound exceeded"
    );
    let dual = |x: &[f64]| {
        model
            .conjugate_dual(&MeanParams::new(x.to_vec()).unwrap())
            .unwrap()
    };
    let gap = dual(&run.average) - dual(&mu0);
    Converged {
        average: run.average,
        mu0,
        gap,
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn averaged_gradient_meets_its_accuracy() {
    for g in [
        generate_graph(GraphKind::Complete, 2, 0).unwrap(),
        generate_graph(GraphKind::Path, 3, 0).unwrap(),
    ] {
        let run = run_to_accuracy(&g, 1e-2);
        assert!(
            run.gap >= -1e-12 && run.gap <= 1e-2,
            "{}: gap {}",
            g.descriptor(),
            run.gap
        );
    }
}

/// Strong convexity with modulus `p^{-3/2}` gives
/// `|x - mu(0)|^2 <= 2 p^{3/2} (Phi*(x) - Phi*(mu(0)))`.
#[test]
fn distance_to_optimum_follows_from_strong_convexity() {
    for g in [
        generate_graph(GraphKind::Complete, 2, 0).unwrap(),
        generate_graph(GraphKind::Path, 3, 0).unwrap(),
    ] {
        let run = run_to_accuracy(&g, 1e-3);
        let p = g.p() as f64;
        let dist = euclid(&run.average, &run.mu0);
        assert!(
            dist <= (2.0 * p.powf(1.5) * run.gap).sqrt(),
            "{}",
            g.descriptor()
        );
    }
}

/// The linear form `|x - mu(0)| <= 2 p^{3/2} gap` does not follow from
/// strong convexity and fails once the gap is small.
#[test]
fn linear_distance_bound_fails_for_small_gaps() {
    let g = generate_graph(GraphKind::Complete, 2, 0).unwrap();
    let run = run_to_accuracy(&g, 1e-3);
    let p = g.p() as f64;
    let dist = euclid(&run.average, &run.mu0);
    assert!(run.gap < 1e-4);
    assert!(
        dist > 2.0 * p.powf(1.5) * run.gap,
        "dist {dist} gap {}",
        run.gap
    );
}

#[test]
fn exact_oracle_trace_is_reproducible() {
    let g = generate_graph(GraphKind::Cycle, 4, 0).unwrap();
    let model = HardcoreModel::new(&g).unwrap();
    let cfg = ReductionConfig::desk(4, 60).unwrap();
    let a = projected_threshold_gradient(&mut ExactOracle::new(&model), &cfg).unwrap();
    let b = projected_threshold_gradient(&mut ExactOracle::new(&model), &cfg).unwrap();
    assert_eq!(a.iterates, b.iterates);
    assert_eq!(a.iterates.len(), 61);
    assert_eq!(a.oracle_outputs.len(), 60);
    assert!(a.follows_threshold_rule());
}

#[test]
fn reduction_error_stays_below_reported_bound_scale() {
    // The bound is reported, not enforced; it dwarfs the measured error at
    // desk scale.
    let g = generate_graph(GraphKind::Path, 4, 0).unwrap();
    let model = HardcoreModel::new(&g).unwrap();
    let cfg = ReductionConfig::desk(4, 500)
        .unwrap()
        .with_gamma(0.05)
        .unwrap();
    let mut oracle = NoisyOracle::new(
        &model,
        OracleSpec {
            gamma: 0.05,
            seed: 3,
        },
    )
    .unwrap();
    let est = estimate_marginals_at_zero(&mut oracle, &cfg).unwrap();
    let mu0 = exact_marginals_at_zero(&g).unwrap();
    assert_eq!(est.oracle_calls, 500);
    assert!(sup_diff(&est.estimate, &mu0) <= est.error_bound);
}

#[test]
fn partition_estimate_via_reduction_is_seeded() {
    let g = generate_graph(GraphKind::Path, 3, 0).unwrap();
    let a = estimate_partition_function_via_reduction(&g, 200, 0.05, 11).unwrap();
    let b = estimate_partition_function_via_reduction(&g, 200, 0.05, 11).unwrap();
    assert_eq!(a, b);
    assert!(a.z.is_finite() && a.z > 1.0);
    assert_eq!(
        a.steps.iter().map(|s| s.label).collect::<Vec<_>>(),
        vec![1, 2, 3]
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn telescoping_product_is_exact(g in graph_strategy(1, 14)) {
        let est = estimate_partition_function(&g, exact_marginals_at_zero).unwrap();
        let model = HardcoreModel::new(&g).unwrap();
        let count = model.family().count() as f64;
        prop_assert!((est.z - count).abs() <= 1e-9 * count, "{} vs {}", est.z, count);
        let log_z = model.log_partition(&vec![0.0; g.p()]).unwrap();
        prop_assert!((est.log_z - log_z).abs() <= 1e-9 * log_z.abs().max(1.0));
    }
}
