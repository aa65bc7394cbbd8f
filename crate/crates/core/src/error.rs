use alloc::boxed::Box;
use alloc::string::String;

use crate::planner::Policy;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid mask: variable index {index} out of range for {m} exogenous variables")]
    InvalidMask { index: usize, m: usize },

    #[error("state space too large: {size} states exceeds budget of {budget}")]
    StateSpaceTooLarge { size: u128, budget: u64 },

    #[error("insufficient data: {0}")]
    InsufficientData(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The planner ran out of time before finishing its first sweep. The
    /// greedy policy with respect to the initial values is still attached.
    #[error("planner timed out before completing a sweep")]
    PlannerTimeout { best_so_far: Box<Policy> },

    #[error("operation requires analytic transition tables, which this MDP does not expose")]
    UnsupportedMdp,

    #[error("{m} exogenous variables exceed the brute-force limit of {limit}")]
    TooManyVariables { m: usize, limit: usize },
}

impl Error {
    /// Stable identifier used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidMask { .. } => "invalid-mask",
            Error::StateSpaceTooLarge { .. } => "state-space-too-large",
            Error::InsufficientData(_) => "insufficient-data",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::PlannerTimeout { .. } => "planner-timeout",
            Error::UnsupportedMdp => "unsupported-mdp",
            Error::TooManyVariables { .. } => "too-many-variables",
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
