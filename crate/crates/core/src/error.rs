use thiserror::Error;

use crate::model::{TupleId, TxnId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("unknown transaction {0}")]
    UnknownTransaction(TxnId),
    #[error("transaction {0} did not commit")]
    NotCommitted(TxnId),
    #[error("transaction {0} has no commit or abort in the history")]
    IncompleteHistory(TxnId),

    #[error("assignment dimensions do not match the workload: {0}")]
    DimensionMismatch(String),
    #[error("assignment violates {count} constraint(s), first: {first}")]
    InvalidAssignment { count: usize, first: String },
    #[error("need at least {k} transactions, got {m}")]
    TooFewTransactions { m: usize, k: usize },
    #[error("skewed assignment needs k >= 5, got {0}")]
    TooFewIbs(usize),
    #[error("enumeration budget exceeded: {k}^{m} > {budget}")]
    BudgetExceeded { m: usize, k: usize, budget: u64 },

    #[error("invalid workload spec: {0}")]
    InvalidSpec(String),
    #[error("workload needs {needed} tuples, database has {n}")]
    InsufficientTuples { needed: usize, n: usize },

    #[error("invalid workload: {0}")]
    InvalidWorkload(String),
    #[error("tuple {tuple} out of range for database of {n} tuples")]
    TupleOutOfRange { tuple: TupleId, n: usize },
    #[error("simulation complete")]
    SimulationComplete,
    #[error("log window of malicious transaction {0} contains unterminated transactions")]
    LogGap(TxnId),

    #[error("parse error: {0}")]
    Parse(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("{failed} sweep cell(s) failed: {first}")]
    PartialFailure { failed: usize, first: String },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Error::Io(e.to_string())
        } else {
            Error::Parse(e.to_string())
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
