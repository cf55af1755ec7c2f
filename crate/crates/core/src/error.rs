use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{routine} did not converge")]
    ConvergenceFailure { routine: &'static str },

    #[error("{what} is not positive definite")]
    NotPositiveDefinite { what: String },

    #[error("expected a canonical form of rank {expected}, got rank {found}")]
    WrongRank { expected: usize, found: usize },

    #[error("rank {rank} exceeds the sign-pattern cap {cap}")]
    RankTooLarge { rank: usize, cap: usize },

    #[error("positive definite re-basis stayed singular after {retries} retries")]
    RebaseDegenerate { retries: usize },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("constructed counterexample failed re-verification ({0})")]
    CounterexampleUnverified(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
