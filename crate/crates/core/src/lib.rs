//! Structured sparse subspace clustering.
//!
//! Learns a sparse self-expressive coefficient matrix and a segmentation of
//! the data jointly: a weighted-ℓ1 ADMM solve whose weights penalize
//! coefficients crossing the current segmentation, alternated with spectral
//! clustering of the resulting affinity. Pairwise must-link / cannot-link
//! side information reweights the ℓ1 term.

pub mod admm;
pub mod bench;
pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod spectral;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use pipeline::{run_s3c, run_ssc, ClusterResult, Mode, S3cConfig, Schedule};
pub use types::{
    CoefficientMatrix, Constraint, DataMatrix, HardSegmentation, LinkKind, SideInfoMatrix,
    StructureMatrix,
};
