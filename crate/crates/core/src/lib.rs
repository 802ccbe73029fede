//! Numerical toolkit for complex powers and zeta-regularised densities of
//! Lorentzian wave operators on asymptotically Minkowski spacetimes.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod clifford;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod hadamard;
pub mod ode;
pub mod special;
pub mod spectral;

pub use error::{Error, Result};
