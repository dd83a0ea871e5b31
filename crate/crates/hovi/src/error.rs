//! Crate-wide error type.
//!
//! Variants are grouped by how callers are expected to react: configuration
//! and input problems are caller bugs (CLI maps them to exit code 1), while
//! subproblem/integration failures are runtime numerical failures (exit 2).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A mathematical precondition on an argument was violated (e.g. p < 1).
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed input data (non-finite coordinates, degenerate regions,
    /// too few samples, mismatched dimensions).
    #[error("input error: {0}")]
    Input(String),

    /// An operation was evaluated at a point where it is singular.
    #[error("singularity: {0}")]
    Singularity(String),

    /// The requested derivative/Taylor order exceeds what the oracle can do.
    #[error("capability error: {0}")]
    Capability(String),

    /// An invalid solver or experiment configuration.
    #[error("config error: {0}")]
    Config(String),

    /// A problem-catalog lookup failed.
    #[error("catalog error: {0}")]
    Catalog(String),

    /// A required precondition on problem data failed (e.g. a supposed
    /// stationary point is not stationary).
    #[error("precondition error: {0}")]
    Precondition(String),

    /// An inner (half-step) solve did not reach its residual tolerance.
    #[error("subproblem failure{}: best residual {best_residual:.3e}: {message}",
            .iteration.map(|k| format!(" at iteration {k}")).unwrap_or_default())]
    Subproblem {
        /// Outer iteration index, when the failure happened inside a solver run.
        iteration: Option<usize>,
        /// Best residual dual-norm the inner solver achieved.
        best_residual: f64,
        message: String,
    },

    /// The continuous-time integrator could not advance.
    #[error("integration failure at t = {last_good_t}: {message}")]
    Integration { last_good_t: f64, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Attach an outer-iteration index to a subproblem failure, leaving other
    /// variants untouched.
    pub fn at_iteration(self, k: usize) -> Self {
        match self {
            Error::Subproblem {
                best_residual,
                message,
                ..
            } => Error::Subproblem {
                iteration: Some(k),
                best_residual,
                message,
            },
            other => other,
        }
    }
}
