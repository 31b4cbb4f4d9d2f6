//! Isolation, containment and recovery: response to a detection, damage
//! analysis, undo/redo planning and scheduling of concurrent recoveries.

mod coordinate;
mod recovery;
mod response;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::TxnId;

pub use coordinate::{coordinate, ScheduleEntry};
pub use recovery::{affected_transactions, plan_recovery, RecoveryPlan, RedoStep};
pub use response::{respond, ResponseRecord};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub malicious_txn: TxnId,
    pub at: Vec<TxnId>,
    pub undo_count: usize,
    pub redo_count: usize,
    pub start_tick: u64,
    pub end_tick: u64,
    /// Suspensions recorded while this recovery was in progress.
    pub blocked_txns: u64,
}

impl RecoveryReport {
    pub fn save_all(reports: &[RecoveryReport], path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(reports)?)?;
        Ok(())
    }
}
