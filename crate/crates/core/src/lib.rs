//! Damped-Newton policy iteration (α-PI) for continuous-time nonlinear
//! H∞ control.
//!
//! The crate is `no_std` and only needs `alloc`. It covers:
//!
//! - [`dynamics`]: control-affine systems, fixed-step RK4 windows, window
//!   quadrature, the planar missile–target engagement.
//! - [`basis`]: multivariate monomial bases with exact gradients.
//! - [`hji`]: critic functions and saddle-point policies, plus the HJI
//!   residual map with its Fréchet differential.
//! - [`onpolicy`] and [`offpolicy`]: the two α-PI learners.
//! - [`oracle`]: ground truth for linear-quadratic games (GARE).
//! - [`missile`]: interception with periodically re-solved guidance.
#![no_std]
// `!(x > 0.0)` style guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod basis;
pub mod dynamics;
mod error;
pub mod hji;
pub mod learner;
pub mod linalg;
pub mod missile;
pub mod offpolicy;
pub mod onpolicy;
pub mod oracle;

pub use error::{Error, Result};

pub use nalgebra::{DMatrix, DVector};

/// Standard gravity, m/s².
pub const G0: f64 = 9.81;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
