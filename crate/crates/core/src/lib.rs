//! Finite element laboratory for scalar and modified Maxwell Steklov
//! eigenvalue problems in absorbing media.

// `!(x > t)` is used on purpose so that NaN fails the check; index loops
// mirror the matrix formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod boundary_ops;
#[cfg(feature = "cli")]
pub mod cli;
pub mod config;
pub mod eigensolver;
pub mod error;
pub mod fem_maxwell;
pub mod fem_scalar;
pub mod geometry;
pub mod linalg;
pub mod materials;
pub mod mesh;
pub mod problem;
pub mod sparse;
pub mod stability;

pub use error::{Error, Result};
