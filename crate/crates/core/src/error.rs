//! Crate-wide error type.

use crate::market::Side;
use crate::AgentId;
use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An auction was attempted on a book with no orders on one side.
    #[error("order book has no {side:?} orders")]
    EmptySide { side: Side },

    /// An agent was scheduled to trade but has no trace sample.
    #[error("agent {agent} has no trace sample for period {period}")]
    MissingTrace { agent: AgentId, period: u32 },

    /// A trace or config file could not be read.
    #[error("cannot read {path}: {source}")]
    FileAccess {
        path: PathBuf,
        source: std::io::Error,
    },

    /// A malformed row in a trace file.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// A trace file header is missing an expected column.
    #[error("{path}: missing column `{column}`")]
    Schema { path: PathBuf, column: String },

    /// An agent's trace skips a period.
    #[error("agent {agent} is missing period {period} in its trace")]
    Gap { agent: AgentId, period: u32 },

    /// Structurally inconsistent trace data (duplicates, split membership).
    #[error("trace data: {0}")]
    Trace(String),

    /// A chain event was recorded with a timestamp before the chain head.
    #[error("chain {chain}: event at {at}s precedes chain head at {head}s")]
    TimeRegression { chain: String, at: f64, head: f64 },

    /// An anchor was requested for a chain with no unanchored events.
    #[error("chain {chain}: no unanchored events")]
    NothingToAnchor { chain: String },

    /// A chain log does not verify against its anchor records.
    #[error("chain {chain}: {detail}")]
    ChainMismatch { chain: String, detail: String },

    /// Settlement legs do not cover a grid's net position exactly.
    #[error("grid {grid}, period {period}: {detail}")]
    ImbalancedSettlement {
        grid: String,
        period: u32,
        detail: String,
    },

    /// Invalid configuration or invalid orders derived from it.
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 config errors, 2 data errors,
    /// 3 internal invariant violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::MissingTrace { .. }
            | Error::FileAccess { .. }
            | Error::Parse { .. }
            | Error::Schema { .. }
            | Error::Gap { .. }
            | Error::Trace(_)
            | Error::Io(_) => 2,
            Error::EmptySide { .. }
            | Error::TimeRegression { .. }
            | Error::NothingToAnchor { .. }
            | Error::ChainMismatch { .. }
            | Error::ImbalancedSettlement { .. } => 3,
        }
    }
}
