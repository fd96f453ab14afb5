//! One-bit massive MIMO simulation library.
//!
//! The pipeline runs from spatially non-stationary channel synthesis through
//! one-bit quantization (plain and dithered), covariance estimation from sign
//! data, angular-domain covariance refinement and Bussgang LMMSE channel
//! estimation, to multi-user receiver sum rates. [`harness`] ties the stages
//! into reproducible Monte Carlo sweeps that emit CSV.

pub mod aps_fitting;
pub mod bussgang;
pub mod channel_model;
pub mod cov_estimation;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod nnls;
pub mod quantizer;
pub mod receivers;
pub mod rng;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, HermitianMatrix, C64};

#[cfg(test)]
mod testutil;
