//! Latent space models for multiplex networks with shared structure.
//!
//! A multiplex network observes `m` symmetric adjacency matrices `A_1..A_m`
//! on one shared node set. This crate estimates the decomposition
//!
//! ```text
//! E[A_k] ~ g(F + G_k)
//! ```
//!
//! where `F` is a low-rank symmetric component common to every layer and each
//! `G_k` is a low-rank component individual to layer `k`. Estimation minimizes
//! a nuclear-norm-penalized log-likelihood by blockwise proximal gradient
//! descent ([`solver`]), optionally followed by an eigenvalue refitting stage
//! that removes shrinkage bias ([`refit`]). Supporting modules provide the
//! symmetric linear algebra kernels ([`linalg`]), noise-level estimation and
//! tuning-parameter selection ([`tuning`]), latent-position extraction and
//! evaluation metrics ([`embed`]), synthetic generators ([`simulate`]), and
//! reference baselines ([`baseline`]).
//!
//! Both Gaussian edge weights (identity link) and Bernoulli edges (logistic
//! link) are supported, with arbitrary per-entry observation masks so that
//! partially observed networks and edge cross-validation folds run through
//! the same code path.

pub mod baseline;
pub mod embed;
mod error;
pub mod linalg;
pub mod model;
pub mod refit;
pub mod simulate;
pub mod solver;
pub mod tuning;

// Re-exported because public signatures ([`EigenPair::vectors`],
// [`embed::ase`], [`simulate::SimTruth`]) use its matrix types.
pub use nalgebra;

pub use baseline::{OracleReport, SvtPenalty, SvtReport};
pub use embed::ErrorMetrics;
pub use error::{Error, Result};
pub use linalg::{EigenPair, SymMatrix};
pub use model::{
    Block, EdgeFamily, LatentDecomposition, LowRank, MultiplexNetwork, ObservationMask, Signature,
};
pub use refit::RefitReport;
pub use simulate::{HeldOutTriple, HoldoutMode, SimTruth};
pub use solver::{FitReport, SolverConfig};
pub use tuning::{CvCandidates, CvReport, TuningMethod, TuningSelection};
