//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by measure, transport, tangent and control operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Two objects live in spaces of different dimension.
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    /// A coupling or ensemble does not have the required marginal.
    #[error("marginal mismatch: {0}")]
    MarginalMismatch(String),

    /// Two tangent elements do not share the same base measure.
    #[error("base measure mismatch: {0}")]
    BaseMismatch(String),

    /// Time grids of two objects differ.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A linear program or descent did not reach a certified solution.
    #[error("solver failure: {0}")]
    SolverFailure(String),

    /// Sinkhorn iteration did not reach the marginal threshold.
    #[error("no convergence after {0} iterations")]
    NonConvergence(usize),

    /// The instance exceeds the size supported by an exact routine.
    #[error("instance too large: {0}")]
    TooLarge(String),

    /// An exact-arithmetic routine was called on float-only weights.
    #[error("exact rational weights required: {0}")]
    NonRationalWeights(String),

    /// A path ensemble is missing its velocity track.
    #[error("velocity track required: {0}")]
    MissingVelocities(String),

    /// A quotient against transport cost was requested on a zero-cost coupling.
    #[error("coupling has zero transport cost")]
    ZeroCost,

    /// A velocity field evaluated to a non-finite value.
    #[error("velocity field not finite at {0}")]
    NonFiniteField(String),

    /// A measure violates its construction invariants.
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    /// Malformed input data (schema level).
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
