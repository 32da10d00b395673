//! Simulation and estimation toolkit for kernel-based spatial random graphs
//! (KSRGs): spatial vertices with heavy-tailed weights ("marks"), edges drawn
//! independently with a probability that couples the two marks through a
//! kernel and decays with distance.
//!
//! The crate provides
//! - exact samplers for the model on a box (Poisson or lattice vertices),
//! - closed-form phase exponents for boundary/cluster asymptotics,
//! - Monte Carlo experiment drivers that check the predicted scaling laws.
//!
//! Everything is deterministic given a master seed: replicate seeds are
//! derived by a fixed integer mix ([`seed::derive_seed`]) and each replicate
//! consumes its own RNG stream, so results do not depend on thread count.

pub mod components;
pub mod error;
pub mod experiments;
pub mod ext;
pub mod graphgen;
pub mod model;
#[cfg(any(test, feature = "oracles"))]
pub mod oracles;
pub mod params;
pub mod pointprocess;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
pub use experiments::{
    ExperimentKind, ExperimentPlan, ExperimentResult, ExperimentRow, ScalingFit,
};
pub use ext::ExtReal;
pub use graphgen::SpatialGraph;
pub use model::{MarkedVertex, VertexSet};
pub use params::{ExponentReport, KernelKind, ModelParams, PhaseType, ProfileKind, VertexProcess};
pub use pointprocess::BoxSpec;
