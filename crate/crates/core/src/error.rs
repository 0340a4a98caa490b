use thiserror::Error;

use crate::solvers::SolverReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fields live on different spaces")]
    SpaceMismatch,

    /// A zero (or numerically zero) pivot was met during factorization.
    #[error("singular matrix: zero pivot at row {row}")]
    SingularMatrix { row: usize },

    /// Krylov breakdown, usually a violated method precondition.
    #[error("{method} breakdown: {reason}")]
    Breakdown { method: &'static str, reason: String },

    #[error("{method} did not converge in {iterations} iterations (residual {residual:.3e})")]
    LinearNotConverged {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("{driver} did not converge in {} iterations", report.iterations)]
    NotConverged {
        driver: &'static str,
        report: Box<SolverReport>,
    },

    #[error("singular Jacobian at Newton iteration {iteration}")]
    SingularJacobian { iteration: usize },

    #[error("inverse iteration stagnated after {iterations} steps (last Rayleigh quotient {rayleigh:.6e})")]
    EigenStagnation { iterations: usize, rayleigh: f64 },

    #[error("time slab {slab}: {source}")]
    Slab {
        slab: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("invalid config value for `{key}`: {message}")]
    ConfigValue { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
