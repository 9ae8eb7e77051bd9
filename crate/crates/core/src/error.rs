use thiserror::Error;

use crate::scheme::SchemeTrace;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the solver. Each variant is tagged with the module that
/// produced it so diagnostics can be traced back without a backtrace.
#[derive(Debug, Error)]
pub enum Error {
    #[error("[geometry] {0}")]
    Geometry(String),

    #[error("[expression] {0}")]
    Expression(String),

    #[error("[cost] {0}")]
    Cost(String),

    #[error("[cost] c-exponential: {0}")]
    CExp(String),

    #[error("[partition] {0}")]
    Partition(String),

    #[error("[scheme] {0}")]
    Scheme(String),

    /// The scheme gave up; the trace up to the failure is kept for post-mortem.
    #[error("[scheme] aborted: {reason}")]
    SchemeAbort {
        reason: String,
        trace: Box<SchemeTrace>,
    },

    #[error("[bounds] {0}")]
    Bounds(String),

    #[error("[oracle] {0}")]
    Oracle(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}
