//! Implied volatility from precomputed low-rank Chebyshev interpolants.
// `!(a < b)` is used on purpose so NaN lands in the rejecting branch;
// tabulated coefficients keep their published digits.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod bs;
pub mod builder;
pub mod cheb;
pub mod domain;
pub mod engine;
pub mod io;
pub mod error;
pub mod experiments;
pub mod laplace;
pub mod oracle;
pub mod special;

pub use error::{Error, Result};
