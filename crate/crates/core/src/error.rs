//! Crate-wide error type.
//!
//! Solvers report *physical* infeasibility through their result types
//! (a zero-capacity [`SolveResult`](crate::model::SolveResult) or an explicit
//! [`Error::HarvestInfeasible`]); `Error` covers everything that should stop a
//! computation: bad inputs, domain violations and numerical guard failures.

use thiserror::Error;

/// Errors produced by the model, solvers and experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A mathematical operation was called outside its domain
    /// (e.g. converting 0 W to dBm, or a log of a non-positive SINR).
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter or configuration field failed validation.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The harvesting constraint cannot be met by any allocation:
    /// even the whole budget on the best subcarrier falls short.
    #[error(
        "harvesting constraint infeasible: requires {required:.6e} W, \
         maximum possible is {max_possible:.6e} W"
    )]
    HarvestInfeasible { required: f64, max_possible: f64 },

    /// The powers handed to the splitting-ratio update cannot satisfy the
    /// harvesting constraint even with the whole received power harvested.
    #[error("splitting-ratio update infeasible: {0}")]
    InfeasibleAtFixedPowers(String),

    /// A numerical invariant the algorithms rely on was violated at runtime
    /// (e.g. non-monotone harvest along the dual search).
    #[error("numerical guard tripped: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
