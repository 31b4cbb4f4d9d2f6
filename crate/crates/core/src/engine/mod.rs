//! Discrete-event simulation of the protected database: storage, logging,
//! admission control, detection and the recovery state machine.

mod config;
mod ctt;
mod ids;
mod log;
mod sim;
mod store;
mod trace;

pub use config::{SimConfig, SimStrategy};
pub use ctt::{CorruptedTuplesTable, CttEntry, CttStatus};
pub use ids::{Detection, Ids};
pub use log::{CommitEntry, LogOp, LogRecord, TxnLog, Version};
pub use sim::{Admission, Leak, Simulator};
pub use store::Store;
pub use trace::{read_trace, write_trace, Event, EventKind, SuspendReason};
