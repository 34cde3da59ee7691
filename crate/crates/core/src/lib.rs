//! Robust Lasso-Zero and Thresholded Justice Pursuit for sparse linear
//! regression when a few observations are grossly corrupted or covariates
//! are missing.
//!
//! The numerical core ([`matrix`], [`design`], [`lp`], [`estimators`],
//! [`calibration`]) is generic over [`Scalar`] (`f32` or `f64`). The
//! aliases below fix the element type to `f64`, which is what the
//! missing-data pipeline, the identifiability checks and the simulation
//! harness use.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod calibration;
pub mod design;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod io;
pub mod lp;
pub mod matrix;
pub mod metrics;
pub mod missing;
pub mod rng;
pub mod scalar;
pub mod signs;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use rng::RngStream;
pub use scalar::Scalar;
pub use signs::SignVector;

pub type DenseMatrix = Matrix<f64>;
pub type RealVector = Vec<f64>;
