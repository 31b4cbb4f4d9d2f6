use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::engine::{Detection, TxnLog};
use crate::error::{Error, Result};
use crate::model::{TransactionSpec, TupleId, TxnId};
use crate::partition::IBAssignment;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub malicious_txn: TxnId,
    pub t_c: u64,
    pub t_d: u64,
    /// IBs touched by the malicious transaction.
    pub spanned_ibs: BTreeSet<u32>,
    /// Tuples written in the detection window inside those IBs.
    pub suspected: BTreeSet<TupleId>,
}

/// Collects every tuple written since the malicious commit (itself included)
/// that lives in an IB the malicious transaction spans. With a single-IB
/// assignment this degenerates to every tuple written in the window.
pub fn respond(
    log: &TxnLog,
    txns: &[TransactionSpec],
    assignment: &IBAssignment,
    detection: &Detection,
) -> Result<ResponseRecord> {
    let m = detection.malicious_txn;
    let spec = txns.get(m.index()).ok_or(Error::UnknownTransaction(m))?;
    let commit = *log.commit_of(m).ok_or(Error::NotCommitted(m))?;
    let spanned_ibs = assignment.ibs_of(spec.tuples().iter());
    let mut suspected: BTreeSet<TupleId> = spec.writes.iter().copied().collect();
    for c in log.commits_after(commit.seq) {
        for &o in &txns[c.txn.index()].writes {
            if assignment.tuple_ibs[o.index()].iter().any(|ib| spanned_ibs.contains(ib)) {
                suspected.insert(o);
            }
        }
    }
    Ok(ResponseRecord { malicious_txn: m, t_c: commit.tick, t_d: detection.detect_time, spanned_ibs, suspected })
}
