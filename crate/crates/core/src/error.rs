use thiserror::Error;

use crate::flow::FlowSample;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("soliton residual has no sign change on [0, 1]: I(0) = {at_zero:e}, I(1) = {at_one:e}")]
    NoBracket { at_zero: f64, at_one: f64 },

    #[error(
        "soliton residual evaluations disagree at c = {c}: exact {exact:e}, quadrature {quadrature:e}"
    )]
    ResidualMismatch { c: f64, exact: f64, quadrature: f64 },

    #[error("profile construction failed: {0}")]
    Construction(String),

    #[error("critical radius search failed: {0}")]
    CriticalRadii(String),

    #[error("root finding failed: {0}")]
    Root(String),

    #[error("quadrature failed on [{a}, {b}]: estimated error {error:e} after {intervals} intervals")]
    Quadrature {
        a: f64,
        b: f64,
        error: f64,
        intervals: usize,
    },

    #[error("integration failed at t = {t}: {reason} ({} samples recorded)", .partial.len())]
    Integration {
        t: f64,
        reason: String,
        partial: Vec<FlowSample>,
    },

    #[error("type-I rate check failed: {0}")]
    TypeOne(String),

    #[error("finite-difference extrapolation did not converge:\n{table}")]
    FdConvergence { table: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParams(_) | Error::Domain(_) => 2,
            Error::Validation(_) | Error::TypeOne(_) => 3,
            _ => 1,
        }
    }
}
