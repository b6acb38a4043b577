use thiserror::Error;

use crate::solver::SolveReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid input: bad sizes, degenerate geometry, mismatched spaces.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Newton iteration for a quadrature node failed to settle.
    #[error("quadrature construction failed for node {index} (n = {n}): {reason}")]
    Construction {
        index: usize,
        n: usize,
        reason: String,
    },

    /// The low-order refined space cannot resolve the high-order space:
    /// `lor_n * (q + 1) < p + 1`.
    #[error("incompatible spaces: n(q+1) = {lor_n}*({q}+1) < p+1 = {p}+1")]
    Compatibility { p: usize, q: usize, lor_n: usize },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("iterative solver did not converge: {report}")]
    NonConvergence {
        report: SolveReport,
        history: Vec<f64>,
    },
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    /// Short machine-readable tag for the error family.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Argument(_) => "argument",
            Error::Construction { .. } => "construction",
            Error::Compatibility { .. } => "compatibility",
            Error::Unsupported(_) => "unsupported",
            Error::NonConvergence { .. } => "non-convergence",
        }
    }
}
