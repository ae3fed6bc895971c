//! Numerical laboratory for Dirichlet eigenfunctions of partially rectangular billiards.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adiabatic;
pub mod bounds;
pub mod config;
pub mod discretize;
pub mod error;
pub mod export;
pub mod forms_suite;
pub mod geometry;
pub mod onedim;
pub mod parallel;
pub mod resonance;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{BilliardProfile, ProfileKind};
