//! Adaptive stochastic optimization with approximation diagnostics.
//!
//! The crate models adaptive optimization problems over a finite ground set
//! whose items reveal random states when selected. It provides:
//!
//! * a tabular kernel for priors, observation histories, posteriors and
//!   policy trees (`core`),
//! * greedy, non-adaptive and exhaustive-optimal policies (`policies`),
//! * brute-force computation of the adaptive submodularity ratio and
//!   related quantities on small instances (`brute`),
//! * bipartite influence maximization under independent cascade,
//!   linear threshold, extended linear threshold and triggering models
//!   (`infmax`),
//! * feature selection driven by the squared multiple correlation (`features`),
//! * closed-form constructions with known ratios and gaps (`cases`).
//!
//! The `adasub` binary exposes the experiment and verification drivers.

pub mod brute;
pub mod cases;
pub mod core;
pub mod error;
pub mod features;
pub mod infmax;
pub mod linalg;
pub mod policies;
pub mod seed;

pub use crate::core::{
    ElementSet, ExpectedGain, Objective, PartialRealization, PolicyTree, Realization, StateSpace,
    TabularPrior,
};
pub use crate::error::{Error, Result};
