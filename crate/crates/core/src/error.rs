use thiserror::Error;

use crate::ids::{BlockId, ProcessId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("chains start at different genesis blocks ({0} vs {1})")]
    GenesisMismatch(BlockId, BlockId),

    #[error("unknown block {0}")]
    UnknownBlock(BlockId),

    #[error("block {0} is already present in the tree")]
    DuplicateBlock(BlockId),

    #[error("block {0} has no parent")]
    MissingParent(BlockId),

    #[error("malformed tree: {0}")]
    MalformedTree(String),

    #[error("process {0} has no registered merit")]
    UnknownProcess(ProcessId),

    #[error("invalid merit: {0}")]
    InvalidMerit(String),

    #[error("block {0} already carries a token")]
    AlreadyStamped(BlockId),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("malformed history at event {event_id}: {reason}")]
    MalformedHistory { event_id: u64, reason: String },

    #[error("trace line {line}: {reason}")]
    TraceParse { line: usize, reason: String },

    #[error("operation not found: {0}")]
    OperationNotFound(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
