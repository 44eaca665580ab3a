use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A system or potential descriptor string did not parse.
    #[error("descriptor parse error: {0}")]
    Parse(String),

    /// The parsed branches do not form a valid contracting system
    /// with pairwise interior-disjoint images.
    #[error("invalid system: {0}")]
    InvalidSystem(String),

    /// A precondition on an operation argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An enumeration would exceed the configured evaluation budget.
    /// This is a refusal, never a silent truncation.
    #[error("budget exceeded: {needed} cylinder evaluations requested, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },

    /// Root bracketing failed even after expanding the search interval.
    #[error("bracket failure: {0}")]
    BracketFailure(String),

    /// Not enough data points for an extrapolation.
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    /// Exact integer arithmetic left its supported range.
    #[error("exact arithmetic overflow: {0}")]
    Overflow(String),

    /// An internal invariant that should hold by construction failed.
    /// Seeing this means a bug, not bad input.
    #[error("internal invariant violation: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;
