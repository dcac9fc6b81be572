//! Promise dissemination, stability detection and ordered execution,
//! including multi-partition commit aggregation and the MStable exchange.

mod handlers;
mod table;

pub use table::PromiseTable;

use crate::core::{CommandId, Timestamp};
use std::collections::BTreeSet;

/// Execution-side cursor: locally committed commands awaiting execution,
/// ordered by `(timestamp, id)`, plus the last executed pair. Execution
/// halts at the first command whose MStable witnesses are incomplete so
/// order is preserved.
#[derive(Debug, Clone, Default)]
pub struct ExecutionState {
    /// Committed, not yet executed.
    pub(crate) queue: BTreeSet<(Timestamp, CommandId)>,
    pub(crate) last_executed: Option<(Timestamp, CommandId)>,
    /// Cached stable watermark; set by `execution_step`.
    pub(crate) stable: Timestamp,
}
