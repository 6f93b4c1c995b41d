//! Estimation of block connectivity matrices and their rank from samples of
//! stochastic blockmodel graphs.

// `!(x > 0.0)` is used on purpose so that NaN fails the check too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admm;
pub mod baseline;
pub mod cluster;
pub mod error;
pub mod experiment;
pub mod io;
pub mod model;
pub mod multilayer;
pub mod numerics;
pub mod theory;
pub mod tuning;

pub use error::{NetError, Result};
