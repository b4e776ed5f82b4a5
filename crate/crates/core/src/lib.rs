//! Exact inference, backward mapping and marginal-polytope geometry for the
//! hard-core model, plus the projected-gradient reduction that recovers
//! marginals from a noisy backward-mapping oracle.

pub mod backward;
pub mod error;
pub mod graph;
pub mod inference;
pub mod polytope;
pub mod reduction;
pub mod seeds;
pub mod verify;

pub use error::{Error, Result};
pub use graph::{Graph, GraphKind, IndependentSetFamily};
pub use inference::{CanonicalParams, HardcoreModel, MeanParams};
