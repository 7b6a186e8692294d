//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by manifold operations, the filter, and the simulation
/// harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A vector or matrix had the wrong dimension for the operation.
    #[error("{context}: expected dimension {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A point's structure does not match the manifold it was used with.
    #[error("point does not match manifold: expected {expected}, found {found}")]
    PointMismatch {
        expected: &'static str,
        found: &'static str,
    },

    /// A 3x3 matrix failed the rotation-matrix checks.
    #[error("invalid rotation matrix: |R'R - I| = {orthogonality:.3e}, det = {determinant}")]
    InvalidRotation {
        orthogonality: f64,
        determinant: f64,
    },

    /// An input lies outside the domain where a closed form is defined.
    #[error("angle {angle} rad is outside the supported domain (limit {limit} rad)")]
    JacobianDomain { angle: f64, limit: f64 },

    /// The innovation covariance cannot be inverted reliably.
    #[error("innovation covariance is singular or ill-conditioned (condition {condition:.3e})")]
    SingularInnovation { condition: f64 },

    /// The transformed prior covariance cannot be inverted reliably.
    #[error("prior covariance is singular or ill-conditioned (condition {condition:.3e})")]
    SingularPrior { condition: f64 },

    /// A matrix that must be positive definite is not.
    #[error("{what} is not positive definite")]
    NotPositiveDefinite { what: &'static str },

    /// A computation produced NaN or infinite values.
    #[error("{what} is not finite")]
    NonFinite { what: &'static str },

    /// A documented precondition was violated by the caller.
    #[error("{0}")]
    Precondition(String),

    /// An error that occurred while processing a particular simulation step.
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Attaches a simulation step index to an error.
    pub fn at_step(self, step: usize) -> Error {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }
}
