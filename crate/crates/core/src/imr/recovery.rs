//! Dependency analysis and the undo/redo plan for one malicious transaction.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::engine::TxnLog;
use crate::error::{Error, Result};
use crate::model::{TransactionSpec, TupleId, TxnId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedoStep {
    pub txn: TxnId,
    pub writes: Vec<(TupleId, i64)>,
    /// Tuples whose last damaging writer is this transaction.
    pub releases: Vec<TupleId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryPlan {
    pub malicious_txn: TxnId,
    /// Affected transactions in commit order.
    pub affected: Vec<TxnId>,
    /// Tuples whose current value is wrong.
    pub corrupted: BTreeSet<TupleId>,
    pub undo: Vec<(TupleId, i64)>,
    /// Tuples that are final after the undo phase.
    pub release_after_undo: Vec<TupleId>,
    pub redo: Vec<RedoStep>,
    /// New values of the affected transactions' writes.
    pub rewrites: Vec<(TxnId, TupleId, i64)>,
    /// Sequence number of the last commit the analysis saw.
    pub window_end_seq: u64,
}

/// Transactions committed after `m` that read, directly or transitively, a
/// value `m` produced. A later write that reads nothing tainted cleans the
/// tuple it writes.
pub fn affected_transactions(log: &TxnLog, txns: &[TransactionSpec], m: TxnId) -> Result<Vec<TxnId>> {
    let commit = *log.commit_of(m).ok_or(Error::NotCommitted(m))?;
    let mut tainted: BTreeSet<TupleId> = txns[m.index()].writes.iter().copied().collect();
    let mut affected = Vec::new();
    for c in log.commits_after(commit.seq) {
        let t = &txns[c.txn.index()];
        if t.reads.iter().any(|o| tainted.contains(o)) {
            affected.push(c.txn);
            tainted.extend(t.writes.iter().copied());
        } else {
            for o in &t.writes {
                tainted.remove(o);
            }
        }
    }
    Ok(affected)
}

/// Builds the compensation plan by replaying the effective history after
/// `m` with `m` removed and every affected transaction re-executed.
pub fn plan_recovery(log: &TxnLog, txns: &[TransactionSpec], m: TxnId, initial: i64) -> Result<RecoveryPlan> {
    let m_commit = *log.commit_of(m).ok_or(Error::NotCommitted(m))?;
    let affected = affected_transactions(log, txns, m)?;
    let at: BTreeSet<TxnId> = affected.iter().copied().collect();

    let mut touched: BTreeSet<TupleId> = txns[m.index()].writes.iter().copied().collect();
    for a in &affected {
        touched.extend(txns[a.index()].writes.iter().copied());
    }
    let mut w: BTreeMap<TupleId, i64> =
        touched.iter().map(|&o| (o, log.effective_before(o, m_commit.seq, initial))).collect();
    // Value before the first damaging write, and the seq of that write.
    let mut undo_value: BTreeMap<TupleId, (u64, i64)> = BTreeMap::new();
    let mut last_writer: BTreeMap<TupleId, TxnId> = BTreeMap::new();
    let mut last_at_writer: BTreeMap<TupleId, TxnId> = BTreeMap::new();
    let mut redo_values: Vec<(TxnId, Vec<(TupleId, i64)>)> = Vec::new();

    for &o in &txns[m.index()].writes {
        undo_value.insert(o, (m_commit.seq, w[&o]));
        last_writer.insert(o, m);
    }
    for c in log.commits_after(m_commit.seq) {
        let t = &txns[c.txn.index()];
        if at.contains(&c.txn) {
            let vals = t.execute(|o| w.get(&o).copied().unwrap_or_else(|| log.effective_before(o, c.seq, initial)));
            for &(o, v) in &vals {
                undo_value.entry(o).or_insert((c.seq, w[&o]));
                w.insert(o, v);
                last_writer.insert(o, c.txn);
                last_at_writer.insert(o, c.txn);
            }
            redo_values.push((c.txn, vals));
        } else {
            for &o in &t.writes {
                if !touched.contains(&o) {
                    continue;
                }
                match log.version_of(o, c.txn) {
                    Some(v) if !v.void => {
                        w.insert(o, v.value);
                        last_writer.insert(o, c.txn);
                    }
                    _ => {}
                }
            }
        }
    }

    // A tuple last written by a clean transaction already holds its correct value.
    let corrupted: BTreeSet<TupleId> = touched
        .iter()
        .copied()
        .filter(|o| last_writer.get(o).is_some_and(|t| *t == m || at.contains(t)))
        .collect();

    let mut order: Vec<(u64, TupleId)> = corrupted.iter().map(|o| (undo_value[o].0, *o)).collect();
    order.sort_unstable();
    let mut undo = Vec::with_capacity(order.len());
    let mut release_after_undo = Vec::new();
    for (_, o) in order {
        if last_at_writer.contains_key(&o) {
            undo.push((o, undo_value[&o].1));
        } else {
            undo.push((o, w[&o]));
            release_after_undo.push(o);
        }
    }

    let mut rewrites = Vec::new();
    let mut redo = Vec::with_capacity(redo_values.len());
    for (txn, vals) in redo_values {
        rewrites.extend(vals.iter().map(|&(o, v)| (txn, o, v)));
        let writes: Vec<(TupleId, i64)> = vals.into_iter().filter(|(o, _)| corrupted.contains(o)).collect();
        let releases = writes.iter().map(|&(o, _)| o).filter(|o| last_at_writer[o] == txn).collect();
        redo.push(RedoStep { txn, writes, releases });
    }

    let window_end_seq = log.commits().last().map_or(m_commit.seq, |c| c.seq);
    Ok(RecoveryPlan { malicious_txn: m, affected, corrupted, undo, release_after_undo, redo, rewrites, window_end_seq })
}
