use thiserror::Error;

/// Errors reported by the queue structures and their tooling.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("item arena exhausted after {0} slots")]
    ArenaExhausted(usize),

    #[error("uid counter overflow")]
    UidOverflow,

    #[error("combining batch cap must be at least 1")]
    ZeroBatchCap,

    #[error("history has {found} operations, checker bound is {bound}")]
    HistoryTooLarge { found: usize, bound: usize },

    #[error("malformed history: {0}")]
    MalformedHistory(String),

    #[error("linearizability search exceeded its budget of {0} states")]
    SearchBudgetExceeded(usize),

    #[error("invalid workload configuration: {0}")]
    InvalidConfig(String),

    #[error("forced schedule could not be realized: {0}")]
    ScheduleNotRealized(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
