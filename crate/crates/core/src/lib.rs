//! Numerical toolkit for discrete optimal transport geometry: measures on
//! `R^d` with exact-weight arithmetic, couplings and certified optimal
//! transport, extended tangent elements (fiberwise velocity distributions),
//! parallel transport and its non-uniqueness, tangent-space metrics,
//! Lagrangian curves and their translations, Holder-regularity estimation
//! for functionals of measures, and a particle-level mean-field control
//! solver with translation-based Lipschitz certificates.

// indexed loops over coordinate arrays read better than iterator chains in
// the numerical kernels
#![allow(clippy::needless_range_loop)]

pub mod control;
pub mod curves;
pub mod error;
pub mod instances;
pub mod measure;
#[cfg(feature = "oracles")]
pub mod oracles;
pub mod ptransport;
pub mod regularity;
pub mod rngutil;
pub mod tangent;
pub mod transport;

pub use error::{Error, Result};
pub use measure::{DiscreteMeasure, Rational};
pub use transport::{solve_ot, wasserstein, Coupling};
