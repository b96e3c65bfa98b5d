//! Spectral analysis of high-dimensional distance covariance matrices.
//!
//! The crate builds DCMs from paired data matrices, solves the coupled
//! Stieltjes-transform equations of their limiting spectral distribution,
//! reconstructs densities and support edges, maps finite-rank dependence
//! strengths to outlier eigenvalue locations through the g-function phase
//! transition, and estimates the detectable dependence rank from adjacent
//! eigenvalue ratios with Monte Carlo calibrated thresholds.
//!
//! Modules follow the pipeline: [`measure`] (population spectral
//! distributions) → [`synth`] (seeded data generation) → [`dcm`] (matrix
//! statistics) → [`lsd`]/[`spike`] (limit theory) → [`rank`] (detection) →
//! [`bench`] (replicated experiments with theoretical overlays).

pub mod bench;
pub mod dcm;
pub mod error;
pub mod linalg;
pub mod lsd;
pub mod measure;
pub mod rank;
pub mod rng;
pub mod spike;
pub mod synth;

pub use error::{Error, Result};
pub use lsd::ModelSpec;
pub use measure::DiscreteMeasure;
pub use synth::{DataPair, InnovationLaw, SpikeSpec};

/// Pins the dense linear algebra backend to sequential mode so numerical
/// output is identical for every worker-pool size; parallelism belongs at
/// replicate granularity. Call once at process start.
pub fn pin_sequential_linalg() {
    faer::set_global_parallelism(faer::Par::Seq);
}
