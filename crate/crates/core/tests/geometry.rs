mod common;

use common::{graph_and_theta, sup_diff};
use hardcore::graph::all_graphs_up_to_isomorphism;
use hardcore::polytope::{
    constraint_status, enumerate_facets, facet_membership, membership, shrunken_membership,
    Certificate, ConstraintKind, ConstraintStatus, MembershipStatus, ReductionConfig,
    MEMBERSHIP_TOLERANCE,
};
use hardcore::HardcoreModel;
use proptest::prelude::*;

/// Every point of the grid `{0, 1/k, ..., 1}^p`.
fn grid(p: usize, k: usize) -> Vec<Vec<f64>> {
    let total = (k + 1).pow(p as u32);
    (0..total)
        .map(|mut n| {
            (0..p)
                .map(|_| {
                    let d = n % (k + 1);
                    n /= k + 1;
                    d as f64 / k as f64
                })
                .collect()
        })
        .collect()
}

fn reconstruct(model: &HardcoreModel, weights: &[f64]) -> Vec<f64> {
    let fam = model.family();
    let mut x = vec![0.0; fam.p()];
    for (k, w) in weights.iter().enumerate() {
        for (xi, v) in x.iter_mut().zip(fam.indicator(k)) {
            *xi += w * v;
        }
    }
    x
}

fn check_grid(p: usize, k: usize) {
    for g in all_graphs_up_to_isomorphism(p) {
        let model = HardcoreModel::new(&g).unwrap();
        let facets = enumerate_facets(model.family()).unwrap();
        for x in grid(p, k) {
            let verdict = membership(model.family(), &x, MEMBERSHIP_TOLERANCE).unwrap();
            let by_facets = facet_membership(&facets, &x, 1e-8);
            assert_eq!(verdict.status, by_facets, "{} at {x:?}", g.descriptor());
            match verdict.certificate {
                Certificate::Weights(w) => {
                    assert!(sup_diff(&reconstruct(&model, &w), &x) <= 1e-8);
                }
                Certificate::Separator { direction, offset } => {
                    let at = |y: &[f64]| direction.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
                    assert!(at(&x) > offset);
                    for s in 0..model.family().count() {
                        assert!(at(&model.family().indicator(s)) <= offset + 1e-9);
                    }
                }
            }
        }
    }
}

#[test]
fn facets_agree_with_lp_on_grids_up_to_three_nodes() {
    for p in 1..=3 {
        check_grid(p, 8);
    }
}

#[test]
fn facets_agree_with_lp_on_grids_with_four_and_five_nodes() {
    check_grid(4, 8);
    check_grid(5, 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Points of the shrunken polytope lie in `M` and keep every facet at
    /// least `eps |h|_inf` away.
    #[test]
    fn shrunken_points_are_interior_and_never_critical(
        (g, theta) in graph_and_theta(2, 6, 4.0),
        scale in 0.0f64..1.0,
    ) {
        let model = HardcoreModel::new(&g).unwrap();
        let cfg = ReductionConfig::desk(g.p(), 10).unwrap();
        let facets = enumerate_facets(model.family()).unwrap();
        let mu = model.marginals(&theta).unwrap().into_inner();
        let start = cfg.start_point();
        let x: Vec<f64> = start.iter().zip(&mu).map(|(a, b)| a + scale * (b - a)).collect();
        if shrunken_membership(model.family(), &x, &cfg).unwrap() {
            let verdict = membership(model.family(), &x, MEMBERSHIP_TOLERANCE).unwrap();
            prop_assert_ne!(verdict.status, MembershipStatus::Outside);
            for f in facets.iter().filter(|f| f.kind == ConstraintKind::Facet) {
                prop_assert!(f.value(&x) <= 1.0 - cfg.epsilon * f.sup_norm() + 1e-9);
                prop_assert_ne!(constraint_status(f, &x, &cfg), ConstraintStatus::Critical);
            }
        }
    }

    #[test]
    fn membership_certificates_reconstruct_interior_points((g, theta) in graph_and_theta(1, 7, 3.0)) {
        let model = HardcoreModel::new(&g).unwrap();
        let mu = model.marginals(&theta).unwrap().into_inner();
        let verdict = membership(model.family(), &mu, MEMBERSHIP_TOLERANCE).unwrap();
        prop_assert_eq!(verdict.status, MembershipStatus::Inside);
        match verdict.certificate {
            Certificate::Weights(w) => {
                prop_assert!(w.iter().all(|&v| v >= -1e-12));
                prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                prop_assert!(sup_diff(&reconstruct(&model, &w), &mu) <= 1e-8);
            }
            other => prop_assert!(false, "unexpected certificate {:?}", other),
        }
    }
}
