//! Maximum-likelihood scatter estimation under elliptical models with
//! group-symmetry constraints.
//!
//! The crate is organized bottom-up:
//!
//! * [`spd`]: SPD matrices, matrix powers and the affine-invariant geodesic;
//! * [`symmetry`]: finite orthogonal groups, invariance tests, group averaging
//!   and sample replication;
//! * [`objectives`]: Tyler and MGGD negative log-likelihoods and the chord
//!   test for geodesic convexity;
//! * [`estimators`]: sample covariances and the reweighted fixed-point scheme;
//! * [`sampling`]: seeded ground truths and elliptical draws;
//! * [`harness`]: the Monte Carlo comparison and its CSV reports.

pub mod cli;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod objectives;
pub mod samples;
pub mod sampling;
pub mod spd;
pub mod symmetry;
pub mod verify;

pub use error::{Error, Result};
pub use estimators::{
    constrained_estimate, estimate_all_four, fixed_point_estimate, proper_sample_covariance,
    sample_covariance, EstimateResult, EstimatorKind, FixedPointConfig, Init,
};
pub use objectives::{generic_nll, mggd_nll, tyler_nll, weight, RhoObjective};
pub use samples::SampleSet;
pub use spd::{
    geodesic, is_spd, spd_power, sym_eig, trace_normalize, GeodesicParam, SpdMatrix, SymEigPair,
};
pub use symmetry::{
    is_invariant, project_to_invariant, symmetrize_samples, verify_group, GroupLabel, SymmetryGroup,
};
