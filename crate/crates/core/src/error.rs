//! Crate-wide error type.

use num_complex::Complex64;

/// Errors produced by measure construction, data synthesis, matrix
/// statistics, the Stieltjes solver and the calibration pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("integrand not finite at atom {atom}: {detail}")]
    Evaluation { atom: f64, detail: String },

    #[error("dimension {dim} is smaller than the number of atoms {atoms}")]
    DimTooSmall { dim: usize, atoms: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("solver did not converge at z = {z} (best residual {best_residual:.3e})")]
    SolverFailed { z: Complex64, best_residual: f64 },

    #[error("branch constraint violated at z = {z}: {detail}")]
    BranchViolation { z: Complex64, detail: String },

    #[error("solver failed at grid index {index} (x = {x}): {source}")]
    GridPoint {
        index: usize,
        x: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("no density sign change found while searching for the support edge (limit {limit})")]
    EdgeNotFound { limit: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("extrapolation did not converge; sequence: {sequence:?}")]
    NonConvergent { sequence: Vec<f64> },

    #[error("spike-location bracket expansion exceeded {limit}")]
    BracketExhausted { limit: f64 },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("{skipped} of {total} replicates aborted: {0}", .detail)]
    TooManySkipped {
        skipped: usize,
        total: usize,
        detail: String,
    },

    #[error("overflow: {0}")]
    Overflow(String),
}

pub type Result<T> = std::result::Result<T, Error>;
