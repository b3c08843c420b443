//! Error type shared across the engine.

use thiserror::Error;

/// Errors surfaced by ingestion, graph construction, and persistence.
#[derive(Debug, Error)]
pub enum Error {
    /// A mapping was built with an empty user or mac side.
    #[error("mapping has an empty {0} side")]
    EmptySide(&'static str),

    /// No observation batch exists for the requested (day, location).
    #[error("no observation batch for day {day}, location {location}")]
    NoSuchBatch { day: u32, location: u32 },

    /// A day graph was requested for a day with no observations at all.
    #[error("no observations on day {0}")]
    EmptyDay(u32),

    /// An invalid day range or window size was given to the planner.
    #[error("invalid interval: {0}")]
    BadInterval(String),

    /// An event line could not be parsed.
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    /// The same identifier token was seen both as a user and as a mac.
    #[error("identifier {0:?} appears as both a user and a mac")]
    NamespaceCollision(String),

    /// The event stream contained no events.
    #[error("input contains no events")]
    EmptyInput,

    /// A graph file failed checksum or structural validation.
    #[error("corrupt graph file: {0}")]
    CorruptGraph(String),

    /// A graph file was written by an incompatible format version.
    #[error("unsupported graph format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    /// Invalid synthetic-world or run parameters.
    #[error("invalid parameter: {0}")]
    BadParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
