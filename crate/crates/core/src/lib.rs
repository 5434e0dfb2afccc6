//! Geometry-aware information theory over finite similarity spaces.
//!
//! Entropy, divergence and mutual information that account for how similar
//! the elements of a space are, plus gradient solvers built on them.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod divergence;
pub mod entropy;
pub mod error;
pub mod infotheory;
pub mod io;
pub mod kernels;
pub mod modes;
pub mod optimize;
pub mod verify;

pub use error::{GaitError, Result};
