use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid quote: {0}")]
    InvalidQuote(String),

    #[error("arbitrage violation: {0}")]
    Arbitrage(String),

    #[error("price {c:e} at x = {x} lies below the lowest interpolated price {bound:e}")]
    BelowDomain { x: f64, c: f64, bound: f64 },

    #[error("price {c:e} at x = {x} lies above the highest interpolated price {bound:e}")]
    AboveDomain { x: f64, c: f64, bound: f64 },

    #[error("no convergence after {iterations} iterations (best v = {best}, residual = {residual:e})")]
    NoConvergence {
        iterations: usize,
        best: f64,
        residual: f64,
    },

    #[error("low-rank fit stalled at rank {rank}, order {order}: residual {residual:e} > tol {tol:e}")]
    FitFailure {
        rank: usize,
        order: usize,
        residual: f64,
        tol: f64,
    },

    #[error("build of {what} failed: {source}")]
    Build { what: String, source: Box<Error> },

    #[error("format error at line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error("unsupported model version: expected `{expected}`, found `{found}`")]
    Version { expected: String, found: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl fmt::Display) -> Self {
        Error::Domain(msg.to_string())
    }

    pub(crate) fn argument(msg: impl fmt::Display) -> Self {
        Error::Argument(msg.to_string())
    }

    pub(crate) fn format(line: usize, msg: impl fmt::Display) -> Self {
        Error::Format {
            line,
            msg: msg.to_string(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
