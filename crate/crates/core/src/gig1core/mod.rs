//! GI/G/1-type Markov chains without disasters: validation, first-passage
//! matrices, R-matrices, the boundary vector and two independent
//! stationary-solution paths.

pub mod chain;
pub mod firstpassage;
pub mod rmatrix;
pub mod stationary;
pub mod truncated;

pub use chain::{Gig1Chain, ValidationReport};
pub use firstpassage::{first_passage, FirstPassageBundle, FirstPassageOptions};
pub use rmatrix::{r_matrices, RMatrices};
pub use stationary::{
    boundary_vector, boundary_vector_windowed, stationary, stationary_with, structural_constants, Method, Solved,
    StationarySolution, StructuralReport, DRIFT_TOL,
};
pub use truncated::truncated_solve;

use thiserror::Error;

use crate::blockseq::SeqError;

/// Failures of chain validation and of the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    /// Blocks have inconsistent shapes.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// A block row does not sum to one.
    #[error("row sums of {block} deviate from 1 by {residual:e}")]
    RowSum {
        /// Which block row failed.
        block: String,
        /// Largest absolute deviation.
        residual: f64,
    },
    /// `A = Σ_k A(k)` is reducible.
    #[error("the phase matrix A = Σ A(k) is reducible")]
    ReducibleA,
    /// Mean drift is nonnegative, so the chain is not positive recurrent.
    #[error("unstable chain: mean drift sigma = {sigma} is not negative")]
    Unstable {
        /// Computed drift.
        sigma: f64,
    },
    /// An iterative solver did not meet its tolerance.
    #[error("{what} did not converge: residual {residual:e}")]
    NotConverged {
        /// Name of the iteration.
        what: String,
        /// Last residual.
        residual: f64,
    },
    /// A linear system was singular.
    #[error("singular matrix in {0}")]
    Singular(String),
    /// Two computations of the drift disagree.
    #[error("drift mismatch: direct {direct} vs first-passage {via_first_passage}")]
    DriftMismatch {
        /// `π Σ k A(k) e`.
        direct: f64,
        /// Value from the first-passage identity.
        via_first_passage: f64,
    },
    /// An argument is outside its admissible range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// Error from sequence algebra.
    #[error(transparent)]
    Seq(#[from] SeqError),
}
