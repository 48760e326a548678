//! Library side of the `ludbfp` command: datasets, metrics files,
//! per-flow analysis and reports.

pub mod analyze;
pub mod dataset;
pub mod evaluate;
pub mod metrics;

/// Bad arguments or unreadable input.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);
