//! Graphs, generators, and exhaustive independent-set enumeration.
//!
//! Node labels are 1-based in every external format (edge-list text, JSON,
//! error messages) and 0-based inside the crate. Independent sets are
//! stored as `u64` bitmasks where bit `i` is the indicator of node `i`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard limit imposed by the bitmask representation.
pub const MAX_NODES: usize = 64;

/// Default cap on `p` for exhaustive enumeration (at most 2^24 subsets).
pub const DEFAULT_ENUMERATION_CAP: usize = 24;

/// Undirected simple graph on nodes `0..p`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    p: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<u64>,
    max_degree: usize,
}

impl Graph {
    /// Builds a graph from 0-based edges, rejecting self-loops and duplicates.
    pub fn new(p: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if p > MAX_NODES {
            return Err(Error::InvalidArgument(format!(
                "at most {MAX_NODES} nodes are supported, got {p}"
            )));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            for x in [a, b] {
                if x >= p {
                    return Err(Error::LabelOutOfRange { label: x + 1, p });
                }
            }
            if a == b {
                return Err(Error::SelfLoop(a + 1));
            }
            let e = (a.min(b), a.max(b));
            if !set.insert(e) {
                return Err(Error::DuplicateEdge(e.0 + 1, e.1 + 1));
            }
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut adjacency = vec![0u64; p];
        for &(a, b) in &edges {
            adjacency[a] |= 1 << b;
            adjacency[b] |= 1 << a;
        }
        let max_degree = adjacency
            .iter()
            .map(|m| m.count_ones() as usize)
            .max()
            .unwrap_or(0);
        Ok(Graph {
            p,
            edges,
            adjacency,
            max_degree,
        })
    }

    /// Graph from a bitmask over the pairs `(i, j)`, `i < j`, in
    /// lexicographic order.
    fn from_pair_mask(p: usize, mask: u64) -> Self {
        let pairs = lex_pairs(p);
        let edges = pairs
            .iter()
            .enumerate()
            .filter(|(k, _)| mask >> k & 1 == 1)
            .map(|(_, &e)| e);
        Graph::new(p, edges).expect("pairs are valid by construction")
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Edges as 0-based `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Neighbor bitmask of node `i` (0-based).
    pub fn neighbors(&self, i: usize) -> u64 {
        self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].count_ones() as usize
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn is_independent(&self, set: u64) -> bool {
        (0..self.p).all(|i| set >> i & 1 == 0 || self.adjacency[i] & set == 0)
    }

    /// Edge-list text, the format accepted by [`parse_graph`].
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("p={}\n", self.p);
        for &(a, b) in &self.edges {
            out.push_str(&format!("{} {}\n", a + 1, b + 1));
        }
        out
    }

    /// Short human-readable descriptor used in reports.
    pub fn descriptor(&self) -> String {
        let edges: Vec<String> = self
            .edges
            .iter()
            .map(|(a, b)| format!("{}-{}", a + 1, b + 1))
            .collect();
        format!("p={} [{}]", self.p, edges.join(" "))
    }
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Graph({})", self.descriptor())
    }
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    p: usize,
    edges: Vec<[usize; 2]>,
}

impl Serialize for Graph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GraphJson {
            p: self.p,
            edges: self.edges.iter().map(|&(a, b)| [a + 1, b + 1]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Graph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = GraphJson::deserialize(d)?;
        let mut edges = Vec::with_capacity(raw.edges.len());
        for [a, b] in raw.edges {
            if a == 0 || b == 0 {
                return Err(serde::de::Error::custom(
                    Error::LabelOutOfRange { label: 0, p: raw.p }.to_string(),
                ));
            }
            edges.push((a - 1, b - 1));
        }
        Graph::new(raw.p, edges).map_err(serde::de::Error::custom)
    }
}

/// Parses the edge-list format: a `p=N` declaration followed by
/// whitespace-separated 1-based edge pairs. Records are separated by
/// newlines or `;`, and `#` starts a comment.
pub fn parse_graph(text: &str) -> Result<Graph> {
    let mut p: Option<usize> = None;
    let mut edges = Vec::new();
    let records = text.lines().enumerate().flat_map(|(n, line)| {
        let line = line.split('#').next().unwrap_or("");
        line.split(';').map(move |r| (n + 1, r.trim()))
    });
    for (line, record) in records {
        if record.is_empty() {
            continue;
        }
        if let Some(rest) = record.strip_prefix('p') {
            let rest = rest.trim_start();
            let value = rest.strip_prefix('=').ok_or_else(|| Error::Malformed {
                line,
                message: format!("expected `p=N`, got `{record}`"),
            })?;
            if p.is_some() {
                return Err(Error::Malformed {
                    line,
                    message: "node count declared twice".into(),
                });
            }
            p = Some(value.trim().parse().map_err(|_| Error::Malformed {
                line,
                message: format!("bad node count `{}`", value.trim()),
            })?);
            continue;
        }
        let p = p.ok_or_else(|| Error::Malformed {
            line,
            message: "edge listed before the `p=N` declaration".into(),
        })?;
        let labels: Vec<&str> = record.split_whitespace().collect();
        if labels.len() != 2 {
            return Err(Error::Malformed {
                line,
                message: format!("expected two labels, got `{record}`"),
            });
        }
        let mut ends = [0usize; 2];
        for (slot, tok) in ends.iter_mut().zip(&labels) {
            let label: usize = tok.parse().map_err(|_| Error::Malformed {
                line,
                message: format!("bad node label `{tok}`"),
            })?;
            if label == 0 || label > p {
                return Err(Error::LabelOutOfRange { label, p });
            }
            *slot = label - 1;
        }
        if ends[0] == ends[1] {
            return Err(Error::SelfLoop(ends[0] + 1));
        }
        edges.push((ends[0], ends[1]));
    }
    let p = p.ok_or_else(|| Error::Malformed {
        line: 0,
        message: "missing `p=N` declaration".into(),
    })?;
    Graph::new(p, edges)
}

impl FromStr for Graph {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_graph(s)
    }
}

/// Families produced by [`generate_graph`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GraphKind {
    Empty,
    Path,
    Cycle,
    Complete,
    /// Node 1 joined to every other node.
    Star,
    RandomRegular {
        degree: usize,
    },
    ErdosRenyi {
        edge_prob: f64,
    },
}

impl FromStr for GraphKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "empty" => GraphKind::Empty,
            "path" => GraphKind::Path,
            "cycle" => GraphKind::Cycle,
            "complete" => GraphKind::Complete,
            "star" => GraphKind::Star,
            "random-regular" => GraphKind::RandomRegular { degree: 3 },
            "erdos-renyi" | "random" => GraphKind::ErdosRenyi { edge_prob: 0.3 },
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown graph kind `{other}`"
                )))
            }
        })
    }
}

/// Deterministic generator; `seed` only matters for the random kinds.
pub fn generate_graph(kind: GraphKind, p: usize, seed: u64) -> Result<Graph> {
    if p == 0 {
        return Err(Error::InfeasibleGraph("p must be at least 1".into()));
    }
    match kind {
        GraphKind::Empty => Graph::new(p, []),
        GraphKind::Path => Graph::new(p, (1..p).map(|i| (i - 1, i))),
        GraphKind::Cycle => {
            if p < 3 {
                return Err(Error::InfeasibleGraph(format!(
                    "a simple cycle needs at least 3 nodes, got {p}"
                )));
            }
            Graph::new(p, (0..p).map(|i| (i, (i + 1) % p)))
        }
        GraphKind::Complete => Graph::new(p, lex_pairs(p)),
        GraphKind::Star => Graph::new(p, (1..p).map(|i| (0, i))),
        GraphKind::RandomRegular { degree } => random_regular(p, degree, seed),
        GraphKind::ErdosRenyi { edge_prob } => {
            if !(0.0..=1.0).contains(&edge_prob) {
                return Err(Error::InvalidArgument(format!(
                    "edge probability {edge_prob} outside [0, 1]"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let edges: Vec<_> = lex_pairs(p)
                .into_iter()
                .filter(|_| rng.gen_bool(edge_prob))
                .collect();
            Graph::new(p, edges)
        }
    }
}

/// Configuration model with rejection of loops and multi-edges.
fn random_regular(p: usize, d: usize, seed: u64) -> Result<Graph> {
    if d >= p {
        return Err(Error::InfeasibleGraph(format!(
            "degree {d} must be below the node count {p}"
        )));
    }
    if p * d % 2 == 1 {
        return Err(Error::InfeasibleGraph(format!(
            "p*d = {} is odd, no {d}-regular graph on {p} nodes",
            p * d
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stubs: Vec<usize> = (0..p).flat_map(|i| std::iter::repeat(i).take(d)).collect();
    'attempt: for _ in 0..10_000 {
        stubs.shuffle(&mut rng);
        let mut seen = BTreeSet::new();
        for pair in stubs.chunks(2) {
            let (a, b) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if a == b || !seen.insert((a, b)) {
                continue 'attempt;
            }
        }
        return Graph::new(p, seen);
    }
    Err(Error::InfeasibleGraph(format!(
        "no simple {d}-regular pairing found on {p} nodes"
    )))
}

fn lex_pairs(p: usize) -> Vec<(usize, usize)> {
    (0..p)
        .flat_map(|i| (i + 1..p).map(move |j| (i, j)))
        .collect()
}

/// One representative per isomorphism class of graphs on `p` nodes
/// (`p <= 6`), in a deterministic order.
pub fn all_graphs_up_to_isomorphism(p: usize) -> Vec<Graph> {
    assert!(p <= 6, "isomorphism-class enumeration is limited to p <= 6");
    if p == 0 {
        return Vec::new();
    }
    let pairs = lex_pairs(p);
    let index_of = |a: usize, b: usize| -> usize {
        let (a, b) = (a.min(b), a.max(b));
        pairs.iter().position(|&e| e == (a, b)).unwrap()
    };
    let perms = permutations(p);
    // For every permutation, where each pair index is sent.
    let maps: Vec<Vec<usize>> = perms
        .iter()
        .map(|perm| {
            pairs
                .iter()
                .map(|&(a, b)| index_of(perm[a], perm[b]))
                .collect()
        })
        .collect();
    let mut classes = BTreeSet::new();
    for mask in 0u64..(1u64 << pairs.len()) {
        let canonical = maps
            .iter()
            .map(|map| {
                map.iter()
                    .enumerate()
                    .filter(|(k, _)| mask >> k & 1 == 1)
                    .fold(0u64, |acc, (_, &to)| acc | 1 << to)
            })
            .min()
            .unwrap();
        classes.insert(canonical);
    }
    classes
        .into_iter()
        .map(|mask| Graph::from_pair_mask(p, mask))
        .collect()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..n).collect();
    heap_permute(n, &mut current, &mut out);
    out
}

fn heap_permute(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(a.clone());
        return;
    }
    heap_permute(k - 1, a, out);
    for i in 0..k - 1 {
        if k % 2 == 0 {
            a.swap(i, k - 1);
        } else {
            a.swap(0, k - 1);
        }
        heap_permute(k - 1, a, out);
    }
}

/// Exhaustive list of independent-set indicator vectors of a graph,
/// sorted by bitmask value.
#[derive(Clone, Debug)]
pub struct IndependentSetFamily {
    graph: Graph,
    sets: Vec<u64>,
}

impl IndependentSetFamily {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn p(&self) -> usize {
        self.graph.p
    }

    pub fn sets(&self) -> &[u64] {
        &self.sets
    }

    pub fn count(&self) -> usize {
        self.sets.len()
    }

    /// Indicator vector of the `k`-th set as floats.
    pub fn indicator(&self, k: usize) -> Vec<f64> {
        let s = self.sets[k];
        (0..self.p()).map(|i| (s >> i & 1) as f64).collect()
    }
}

/// Enumerates `I(G)` by backtracking with neighbor pruning.
pub fn enumerate_independent_sets(g: &Graph) -> Result<IndependentSetFamily> {
    enumerate_independent_sets_capped(g, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_independent_sets_capped(g: &Graph, cap: usize) -> Result<IndependentSetFamily> {
    if g.p > cap {
        return Err(Error::EnumerationCap { p: g.p, cap });
    }
    let mut sets = Vec::new();
    // Explicit stack of (next node to decide, chosen set).
    let mut stack = vec![(0usize, 0u64)];
    while let Some((node, chosen)) = stack.pop() {
        if node == g.p {
            sets.push(chosen);
            continue;
        }
        stack.push((node + 1, chosen));
        if g.adjacency[node] & chosen == 0 {
            stack.push((node + 1, chosen | 1 << node));
        }
    }
    sets.sort_unstable();
    Ok(IndependentSetFamily {
        graph: g.clone(),
        sets,
    })
}

/// Induced subgraph left after deleting the first `k` nodes.
#[derive(Clone, Debug)]
pub struct InducedSubgraph {
    pub graph: Graph,
    /// `labels[new]` is the original 1-based label of new node `new`.
    pub labels: Vec<usize>,
}

/// Removes nodes `1..=k` and relabels the rest as `1..=p-k`.
pub fn remove_prefix(g: &Graph, k: usize) -> Result<InducedSubgraph> {
    if k >= g.p {
        return Err(Error::InvalidArgument(format!(
            "cannot remove {k} of {} nodes",
            g.p
        )));
    }
    let edges = g
        .edges
        .iter()
        .filter(|&&(a, _)| a >= k)
        .map(|&(a, b)| (a - k, b - k));
    Ok(InducedSubgraph {
        graph: Graph::new(g.p - k, edges)?,
        labels: (k + 1..=g.p).collect(),
    })
}
