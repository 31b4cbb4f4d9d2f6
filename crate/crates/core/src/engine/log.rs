//! Read/write transactions log.
//!
//! Besides the append-only record stream the log keeps two indexes the
//! recovery path needs: the commit order of transactions, and per tuple the
//! chain of committed versions. Recovery rewrites that chain (voiding the
//! malicious writes, replacing the values of re-executed transactions), so
//! it always describes the logically correct history as far as is known.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{HistoryEvent, HistoryOp, TupleId, TxnId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogOp {
    Read,
    Write,
    /// Compensating write issued by recovery.
    Undo,
    Redo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub txn_id: TxnId,
    pub tuple: TupleId,
    pub op: LogOp,
    pub before: i64,
    pub after: i64,
    pub tick: u64,
    pub commit_seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommitEntry {
    pub txn: TxnId,
    pub seq: u64,
    pub tick: u64,
    /// Range of this transaction's records in the log.
    pub records: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Version {
    pub seq: u64,
    pub txn: TxnId,
    pub value: i64,
    pub void: bool,
}

#[derive(Debug, Clone, Default)]
pub struct TxnLog {
    records: Vec<LogRecord>,
    commits: Vec<CommitEntry>,
    commit_index: Vec<Option<usize>>,
    versions: Vec<Vec<Version>>,
}

impl TxnLog {
    pub fn new(n: usize, m: usize) -> Self {
        TxnLog {
            records: Vec::new(),
            commits: Vec::new(),
            commit_index: vec![None; m],
            versions: vec![Vec::new(); n],
        }
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn commits(&self) -> &[CommitEntry] {
        &self.commits
    }

    pub fn commit_of(&self, txn: TxnId) -> Option<&CommitEntry> {
        self.commit_index.get(txn.index()).copied().flatten().map(|i| &self.commits[i])
    }

    /// Commits strictly after `seq`, in commit order.
    pub fn commits_after(&self, seq: u64) -> &[CommitEntry] {
        let start = self.commits.partition_point(|c| c.seq <= seq);
        &self.commits[start..]
    }

    pub fn records_of(&self, c: &CommitEntry) -> &[LogRecord] {
        &self.records[c.records.0..c.records.1]
    }

    /// Records appended after the commit with sequence `seq`, compensations included.
    pub fn records_since(&self, seq: u64) -> usize {
        let start = self.records.partition_point(|r| r.commit_seq <= seq);
        self.records.len() - start
    }

    pub(crate) fn append_commit(&mut self, txn: TxnId, seq: u64, tick: u64, ops: Vec<LogRecord>) {
        let start = self.records.len();
        for r in &ops {
            if r.op == LogOp::Write {
                self.versions[r.tuple.index()].push(Version { seq, txn, value: r.after, void: false });
            }
        }
        self.records.extend(ops);
        self.commit_index[txn.index()] = Some(self.commits.len());
        self.commits.push(CommitEntry { txn, seq, tick, records: (start, self.records.len()) });
    }

    pub(crate) fn append_compensation(&mut self, r: LogRecord) {
        self.records.push(r);
    }

    pub fn versions(&self, o: TupleId) -> &[Version] {
        &self.versions[o.index()]
    }

    /// Value of `o` as left by the last live version older than `seq`.
    pub fn effective_before(&self, o: TupleId, seq: u64, initial: i64) -> i64 {
        self.versions[o.index()]
            .iter()
            .rev()
            .find(|v| v.seq < seq && !v.void)
            .map_or(initial, |v| v.value)
    }

    /// Value written by `txn` to `o` in the effective history.
    pub fn version_of(&self, o: TupleId, txn: TxnId) -> Option<&Version> {
        self.versions[o.index()].iter().find(|v| v.txn == txn)
    }

    pub fn effective_value(&self, o: TupleId, initial: i64) -> i64 {
        self.effective_before(o, u64::MAX, initial)
    }

    pub(crate) fn void_versions(&mut self, txn: TxnId, tuples: impl IntoIterator<Item = TupleId>) {
        for o in tuples {
            for v in self.versions[o.index()].iter_mut().filter(|v| v.txn == txn) {
                v.void = true;
            }
        }
    }

    pub(crate) fn rewrite_version(&mut self, txn: TxnId, o: TupleId, value: i64) {
        if let Some(v) = self.versions[o.index()].iter_mut().find(|v| v.txn == txn) {
            v.value = value;
        }
    }

    /// Transaction-level history (compensations excluded) for dependency analysis.
    pub fn history(&self) -> Vec<HistoryEvent> {
        self.history_through(u64::MAX)
    }

    /// History truncated after the commit with sequence `seq`.
    pub fn history_through(&self, seq: u64) -> Vec<HistoryEvent> {
        let end = self.commits.partition_point(|c| c.seq <= seq);
        let mut h = Vec::new();
        for c in &self.commits[..end] {
            for r in self.records_of(c) {
                let op = match r.op {
                    LogOp::Read => HistoryOp::Read(r.tuple),
                    _ => HistoryOp::Write(r.tuple),
                };
                h.push(HistoryEvent::new(c.txn, op, r.tick));
            }
            h.push(HistoryEvent::new(c.txn, HistoryOp::Commit, c.tick));
        }
        h
    }

    /// CSV with columns `txn_id,tuple,op,before,after,tick,commit_seq`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["txn_id", "tuple", "op", "before", "after", "tick", "commit_seq"])
            .map_err(csv_err)?;
        for r in &self.records {
            let op = match r.op {
                LogOp::Read => "read",
                LogOp::Write => "write",
                LogOp::Undo => "undo",
                LogOp::Redo => "redo",
            };
            w.write_record([
                r.txn_id.0.to_string(),
                r.tuple.0.to_string(),
                op.to_string(),
                r.before.to_string(),
                r.after.to_string(),
                r.tick.to_string(),
                r.commit_seq.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> crate::error::Error {
    crate::error::Error::Io(e.to_string())
}
