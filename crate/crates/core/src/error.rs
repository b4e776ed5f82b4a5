use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("node label {label} out of range 1..={p}")]
    LabelOutOfRange { label: usize, p: usize },

    #[error("self-loop at node {0}")]
    SelfLoop(usize),

    #[error("duplicate edge {{{0}, {1}}}")]
    DuplicateEdge(usize, usize),

    #[error("infeasible graph request: {0}")]
    InfeasibleGraph(String),

    #[error("graph has {p} nodes, above the enumeration cap of {cap}")]
    EnumerationCap { p: usize, cap: usize },

    #[error("graph has {p} nodes, above the facet-enumeration cap of {cap}")]
    FacetCap { p: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("node {node} out of range 1..={p}")]
    NodeOutOfRange { node: usize, p: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("backward solve diverged after {iterations} iterations (|theta|_inf = {theta_norm:e}); mean parameters are not in the interior of the marginal polytope")]
    Divergence { iterations: usize, theta_norm: f64 },

    #[error("covariance stayed singular after regularization up to {rho:e}")]
    SingularHessian { rho: f64 },

    #[error("backward solve did not converge in {iterations} iterations (gradient {grad_norm:e})")]
    NotConverged { iterations: usize, grad_norm: f64 },

    #[error("linear program failed: {0}")]
    LinearProgram(String),

    #[error("degenerate hull: {0}")]
    DegenerateHull(String),

    #[error("estimated marginal {value} at step {step} is not below 1")]
    MarginalNotBelowOne { step: usize, value: f64 },

    #[error("sampler starvation: {0}")]
    SamplerStarvation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
