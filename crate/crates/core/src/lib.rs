//! Numerical model of a continuous-variable QKD free-space optical link
//! whose receiver uses an angular rejection filter to define a safe zone.
//!
//! The crate is layered bottom-up:
//!
//! * [`specfun`]: Gamma, Bessel K and error functions.
//! * [`channel`]: beam geometry, pointing error, Gamma-Gamma turbulence and
//!   the Bob/Eve transmissivities.
//! * [`security`]: mutual information, Holevo bound and key rate at a
//!   single channel condition.
//! * [`averaging`]: adaptive quadrature and the turbulence- and
//!   threshold-averaged metrics, with a Monte Carlo cross-check.
//! * [`sweep`]: threshold sweeps, (beam radius, threshold) surfaces and
//!   optimum location.

// `!(x > 0.0)` is used deliberately so NaN lands in the error branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod averaging;
pub mod channel;
pub mod error;
pub mod security;
pub mod specfun;
pub mod sweep;

pub use error::{Error, Result};
