//! Energy management for a hybrid powertrain with several hydrogen fuel-cell
//! stacks and one battery pack.
//!
//! The crate turns a drive cycle into a power-demand profile, models the
//! battery (equivalent circuit + empirical aging) and the fuel-cell stacks
//! (fuel curve + four voltage-decay loss rules), assembles a convex
//! mixed-integer quadratic program that splits demand across stacks and
//! battery while pricing hydrogen and degradation, and validates the result
//! against a grid dynamic-programming benchmark inside a block-receding-
//! horizon simulation loop.

pub mod battery;
pub mod config;
pub mod dp;
pub mod formulation;
pub mod fuelcell;
pub mod mpc;
pub mod report;
#[cfg(test)]
pub(crate) mod testutil;
pub mod vehicle;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum EmsError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("optimization infeasible: {0}")]
    Infeasible(String),
    #[error("time limit reached without a usable solution: {0}")]
    TimeLimit(String),
    #[error("solver gave no usable solution: {0}")]
    SolverFailed(String),
}

pub type Result<T> = std::result::Result<T, EmsError>;
