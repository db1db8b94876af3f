//! Discrete and continuous nonnegative distributions, equilibrium transforms
//! and heuristic heavy-tail class diagnostics.

pub mod diagnostic;
pub mod discrete;
pub mod hazard;
pub mod service;

pub use diagnostic::{class_diagnostic, ClassDiagnostic, TailClass, Verdict};
pub use discrete::{discretized_equilibrium, DiscreteDist};
pub use hazard::HazardSpec;
pub use service::{EquilibriumTail, PoissonMixture, ServiceDist};

use thiserror::Error;

use crate::numeric::quad::QuadError;

/// Errors raised while building or querying a distribution.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    /// A parameter is outside its admissible range.
    #[error("invalid distribution parameter: {0}")]
    InvalidParameter(String),
    /// Masses do not add up to one.
    #[error("distribution masses sum to {0}, not 1")]
    NotNormalized(f64),
    /// A finite mean was required.
    #[error("distribution has infinite mean")]
    InfiniteMean,
    /// A positive mean was required.
    #[error("distribution has zero mean")]
    ZeroMean,
    /// The requested quantity has no closed form for this kind.
    #[error("unsupported for this distribution: {0}")]
    Unsupported(String),
    /// Numerical integration failed.
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    /// A diagnostic grid has too few usable points.
    #[error("diagnostic grid too short: {0}")]
    GridTooShort(String),
}
