//! Robust φ-divergence estimation for parametric and semiparametric
//! two-component mixture models.

pub mod baselines;
pub mod divergence;
pub mod dual;
pub mod error;
pub mod harness;
pub mod kde;
pub mod mle;
pub mod models;
pub mod numerics;
pub mod proximal;
pub mod report;
pub mod spm_lmoments;
pub mod spm_moments;

pub use error::{Error, Result};
