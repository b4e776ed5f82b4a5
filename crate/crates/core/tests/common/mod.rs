#![allow(dead_code)]

use hardcore::graph::Graph;
use proptest::prelude::*;

/// Graph on `lo..=hi` nodes with each edge present independently.
pub fn graph_strategy(lo: usize, hi: usize) -> impl Strategy<Value = Graph> {
    (lo..=hi).prop_flat_map(|p| {
        let pairs: Vec<(usize, usize)> = (0..p)
            .flat_map(|a| (a + 1..p).map(move |b| (a, b)))
            .collect();
        proptest::collection::vec(any::<bool>(), pairs.len()).prop_map(move |keep| {
            let edges = pairs.iter().zip(keep).filter(|(_, k)| *k).map(|(e, _)| *e);
            Graph::new(p, edges).expect("valid edges")
        })
    })
}

/// Graph together with a parameter vector in `[-r, r]^p`.
pub fn graph_and_theta(lo: usize, hi: usize, r: f64) -> impl Strategy<Value = (Graph, Vec<f64>)> {
    graph_strategy(lo, hi).prop_flat_map(move |g| {
        let p = g.p();
        (Just(g), proptest::collection::vec(-r..=r, p))
    })
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
