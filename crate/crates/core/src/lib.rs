//! Distributionally robust learning of linear causal abstractions.
//!
//! The crate learns a matrix `T` mapping a low-level linear SCM onto a
//! high-level one, either against fixed nominal exogenous environments
//! (baselines) or against the worst case in Wasserstein balls around them.

pub mod datasets;
pub mod env;
pub mod eval;
pub mod error;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod radius;
pub mod scm;
pub mod solvers;

pub use error::{Error, Result};
