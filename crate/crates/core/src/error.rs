use thiserror::Error;

/// Errors produced by chain construction, solvers and simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("row {row} ({label}) sums to {sum:.17e}, expected 1")]
    NotStochastic { row: usize, label: String, sum: f64 },

    #[error("chain is not mixing: {0}")]
    NotMixing(MixingWitness),

    #[error("linear solver failed: {0}")]
    SolverFailure(String),

    #[error("power iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("{what}: found {found} which exceeds the cap of {cap}")]
    CapExceeded {
        what: &'static str,
        found: usize,
        cap: usize,
    },

    #[error("simulation exceeded the safety horizon of {horizon} steps")]
    HorizonExceeded { horizon: u64 },

    #[error("need at least {needed} points for a fit, found {found}")]
    InsufficientPoints { found: usize, needed: usize },

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Why a chain failed the mixing test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MixingWitness {
    /// `to` cannot be reached from `from`.
    Reducible { from: String, to: String },
    /// Irreducible, but every cycle length is a multiple of `period`.
    Periodic { period: usize },
}

impl std::fmt::Display for MixingWitness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MixingWitness::Reducible { from, to } => {
                write!(f, "reducible ({to} is unreachable from {from})")
            }
            MixingWitness::Periodic { period } => write!(f, "periodic with period {period}"),
        }
    }
}

impl Error {
    /// True for errors caused by resource caps or bad invocation rather than
    /// by an invalid chain.
    pub fn is_cap_or_usage(&self) -> bool {
        matches!(
            self,
            Error::CapExceeded { .. } | Error::Usage(_) | Error::InsufficientPoints { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
