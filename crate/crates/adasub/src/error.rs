//! Error types shared across the crate.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    /// An observation has zero probability under the prior (or contradicts
    /// the diffusion model, e.g. two live in-edges at a linear-threshold sink).
    #[error("observation is inconsistent with the prior: {0}")]
    InconsistentObservation(String),

    /// A policy tried to select an element that was already observed.
    #[error("policy reselects element {0} already present in the observation history")]
    ElementReuse(usize),

    /// A realized state has no child in the policy tree.
    #[error("policy node for element {element} has no branch for state {state}")]
    MissingBranch { element: usize, state: u32 },

    /// An exhaustive enumeration exceeded its configured cap.
    #[error("enumeration budget exceeded (cap: {cap} nodes)")]
    BudgetExceeded { cap: u64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("Jacobi sweep did not converge within {0} sweeps")]
    NoConvergence(usize),

    #[error("parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },

    #[error("duplicate edge ({src}, {sink})")]
    DuplicateEdge { src: usize, sink: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown verification case: {0}")]
    UnknownCase(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
