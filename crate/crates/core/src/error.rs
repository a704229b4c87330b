use thiserror::Error;

use crate::model::Violation;
use crate::solver::{Allocation, SolverTrace};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid network: {}", join_violations(.0))]
    InvalidNetwork(Vec<Violation>),

    /// A bracketing root search found no sign change.
    #[error("no root in [{lo}, {hi}]: residual {f_lo} at lower end, {f_hi} at upper end")]
    NoRoot {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("dual iteration did not converge after {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        trace: Box<SolverTrace>,
        /// Highest-utility iterate that satisfied the slack tolerance, if any.
        best_feasible: Option<Box<Allocation>>,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("scenario: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
