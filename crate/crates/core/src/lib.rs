//! Stochastic variational integrators for mechanical systems on Rⁿ, SO(3)
//! and products of SE(3), together with the reference solvers and
//! diagnostics used to study them.
//!
//! The crate is organised bottom-up: [`geometry`] (SO(3), retractions and
//! their trivialized tangents), [`noise`] (coupled Brownian paths),
//! [`systems`] (models), [`integrators`] (time steppers), [`ensemble`]
//! (parallel execution over paths) and [`analysis`] (verifiers and
//! estimators).

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod ensemble;
pub mod error;
pub mod geometry;
pub mod integrators;
pub mod noise;
pub mod systems;

pub use error::{Error, Result};

/// Version string written into every output header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
