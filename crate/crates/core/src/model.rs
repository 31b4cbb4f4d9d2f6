//! Database, transaction and history model.
//!
//! A database is a flat array of account balances addressed by [`TupleId`].
//! Transactions are read/write programs over tuple ids; a history is the
//! ordered stream of their operations together with commit/abort markers.
//! Dependencies between committed transactions form the precedence graph,
//! and the transactions reachable from a malicious one are the affected set.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TupleId(pub u32);

impl TupleId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TupleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "o{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TxnId(pub u32);

impl TxnId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TxnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

/// Basis points per unit; transfer fractions are stored as integers over this.
pub const BASIS_POINTS: i64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxnKind {
    /// One source account pays every other account.
    Distribute,
    /// Every account but the last pays the last one.
    Collect,
    /// The first half of the accounts pays the second half.
    ManyToMany,
    /// Blind write of `old + amount` into every written tuple.
    Malicious,
    /// Benign blind write that sets every written tuple to `amount`.
    Overwrite,
}

impl TxnKind {
    pub fn is_transfer(self) -> bool {
        matches!(self, TxnKind::Distribute | TxnKind::Collect | TxnKind::ManyToMany)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Op {
    Read(TupleId),
    Write(TupleId),
}

/// A transaction program.
///
/// Transfers are read-modify-write over the same tuple list: `reads` and
/// `writes` hold the same tuples in the same order, and [`ops`](Self::ops)
/// places every read before every write. Blind writers (`Malicious`,
/// `Overwrite`) have an empty read set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionSpec {
    pub id: TxnId,
    pub kind: TxnKind,
    pub reads: Vec<TupleId>,
    pub writes: Vec<TupleId>,
    /// Transfer fraction in basis points (100 = 1%).
    pub gamma_bp: u32,
    /// Tamper delta for `Malicious`, fresh value for `Overwrite`, unused otherwise.
    #[serde(default)]
    pub amount: i64,
}

impl TransactionSpec {
    pub fn transfer(id: TxnId, kind: TxnKind, tuples: Vec<TupleId>, gamma_bp: u32) -> Self {
        TransactionSpec { id, kind, reads: tuples.clone(), writes: tuples, gamma_bp, amount: 0 }
    }

    pub fn malicious(id: TxnId, tuples: Vec<TupleId>, tamper: i64) -> Self {
        TransactionSpec {
            id,
            kind: TxnKind::Malicious,
            reads: Vec::new(),
            writes: tuples,
            gamma_bp: 0,
            amount: tamper,
        }
    }

    pub fn overwrite(id: TxnId, tuples: Vec<TupleId>, value: i64) -> Self {
        TransactionSpec {
            id,
            kind: TxnKind::Overwrite,
            reads: Vec::new(),
            writes: tuples,
            gamma_bp: 0,
            amount: value,
        }
    }

    pub fn is_malicious(&self) -> bool {
        self.kind == TxnKind::Malicious
    }

    /// Read/write set, deduplicated and sorted.
    pub fn tuples(&self) -> BTreeSet<TupleId> {
        self.reads.iter().chain(self.writes.iter()).copied().collect()
    }

    /// Total operation order: all reads, then all writes.
    pub fn ops(&self) -> Vec<Op> {
        self.reads
            .iter()
            .map(|&t| Op::Read(t))
            .chain(self.writes.iter().map(|&t| Op::Write(t)))
            .collect()
    }

    pub fn check(&self, n: usize) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidWorkload(format!("{}: {msg}", self.id)));
        let tuples = self.tuples();
        if tuples.len() < 2 {
            return bad("fewer than two tuples");
        }
        if let Some(t) = tuples.iter().find(|t| t.index() >= n) {
            return Err(Error::TupleOutOfRange { tuple: *t, n });
        }
        let dedup: BTreeSet<_> = self.writes.iter().collect();
        if dedup.len() != self.writes.len() {
            return bad("duplicate write");
        }
        if self.kind.is_transfer() {
            if self.reads != self.writes {
                return bad("transfer must read every tuple it writes");
            }
            if !(1..=BASIS_POINTS as u32).contains(&self.gamma_bp) {
                return bad("transfer fraction outside (0, 1]");
            }
        } else if !self.reads.is_empty() {
            return bad("blind writer must not read");
        }
        Ok(())
    }

    /// Computes the values this transaction writes.
    ///
    /// `value` returns the current balance of a tuple; for transfers it is
    /// only consulted for tuples in the read set.
    pub fn execute(&self, mut value: impl FnMut(TupleId) -> i64) -> Vec<(TupleId, i64)> {
        let w = &self.writes;
        match self.kind {
            TxnKind::Malicious => w.iter().map(|&t| (t, value(t) + self.amount)).collect(),
            TxnKind::Overwrite => w.iter().map(|&t| (t, self.amount)).collect(),
            TxnKind::Distribute => {
                let src = value(w[0]);
                let each = transfer_amount(src, self.gamma_bp);
                let mut out = Vec::with_capacity(w.len());
                out.push((w[0], src - each * (w.len() as i64 - 1)));
                out.extend(w[1..].iter().map(|&t| (t, value(t) + each)));
                out
            }
            TxnKind::Collect => {
                let last = w.len() - 1;
                let mut total = 0;
                let mut out = Vec::with_capacity(w.len());
                for &t in &w[..last] {
                    let bal = value(t);
                    let amt = transfer_amount(bal, self.gamma_bp);
                    total += amt;
                    out.push((t, bal - amt));
                }
                out.push((w[last], value(w[last]) + total));
                out
            }
            TxnKind::ManyToMany => {
                let split = w.len() / 2;
                let mut total = 0;
                let mut out = Vec::with_capacity(w.len());
                for &t in &w[..split] {
                    let bal = value(t);
                    let amt = transfer_amount(bal, self.gamma_bp);
                    total += amt;
                    out.push((t, bal - amt));
                }
                let dests = (w.len() - split) as i64;
                let share = total.div_euclid(dests);
                let rem = total.rem_euclid(dests);
                for (i, &t) in w[split..].iter().enumerate() {
                    let extra = if i == 0 { rem } else { 0 };
                    out.push((t, value(t) + share + extra));
                }
                out
            }
        }
    }
}

/// `round(gamma * balance)` with half-up rounding, in integer cents.
pub fn transfer_amount(balance: i64, gamma_bp: u32) -> i64 {
    (balance * gamma_bp as i64 + BASIS_POINTS / 2).div_euclid(BASIS_POINTS)
}

/// Tuples accessed by two or more transactions.
pub fn shared_tuples<'a>(txns: impl IntoIterator<Item = &'a TransactionSpec>) -> BTreeSet<TupleId> {
    let mut count: BTreeMap<TupleId, usize> = BTreeMap::new();
    for t in txns {
        for o in t.tuples() {
            *count.entry(o).or_default() += 1;
        }
    }
    count.into_iter().filter(|&(_, c)| c >= 2).map(|(o, _)| o).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HistoryOp {
    Read(TupleId),
    Write(TupleId),
    Commit,
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEvent {
    pub txn: TxnId,
    pub op: HistoryOp,
    pub timestamp: u64,
}

impl HistoryEvent {
    pub fn new(txn: TxnId, op: HistoryOp, timestamp: u64) -> Self {
        HistoryEvent { txn, op, timestamp }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecedenceGraph {
    pub nodes: BTreeSet<TxnId>,
    pub edges: BTreeSet<(TxnId, TxnId)>,
}

impl PrecedenceGraph {
    pub fn successors(&self, node: TxnId) -> impl Iterator<Item = TxnId> + '_ {
        self.edges
            .range((node, TxnId(0))..=(node, TxnId(u32::MAX)))
            .map(|&(_, to)| to)
    }

    pub fn out_degree(&self, node: TxnId) -> usize {
        self.successors(node).count()
    }
}

#[derive(Default)]
struct TxnSummary {
    reads: BTreeSet<TupleId>,
    writes: BTreeSet<TupleId>,
    /// `(commit timestamp, position in history)`; `None` until terminated.
    commit: Option<(u64, usize)>,
    aborted: bool,
}

/// Per-transaction read/write sets and commit order of a history.
struct HistoryIndex {
    txns: BTreeMap<TxnId, TxnSummary>,
}

impl HistoryIndex {
    fn new(history: &[HistoryEvent]) -> Self {
        let mut txns: BTreeMap<TxnId, TxnSummary> = BTreeMap::new();
        for (pos, ev) in history.iter().enumerate() {
            let s = txns.entry(ev.txn).or_default();
            match ev.op {
                HistoryOp::Read(o) => {
                    s.reads.insert(o);
                }
                HistoryOp::Write(o) => {
                    s.writes.insert(o);
                }
                HistoryOp::Commit => s.commit = Some((ev.timestamp, pos)),
                HistoryOp::Abort => s.aborted = true,
            }
        }
        HistoryIndex { txns }
    }

    fn committed(&self, id: TxnId) -> Result<&TxnSummary> {
        let s = self.txns.get(&id).ok_or(Error::UnknownTransaction(id))?;
        if s.commit.is_none() {
            return Err(Error::NotCommitted(id));
        }
        Ok(s)
    }

    /// Committed transactions in commit order.
    fn commit_order(&self) -> Vec<(TxnId, &TxnSummary)> {
        let mut v: Vec<_> = self
            .txns
            .iter()
            .filter(|(_, s)| s.commit.is_some())
            .map(|(&id, s)| (id, s))
            .collect();
        v.sort_by_key(|(_, s)| s.commit);
        v
    }
}

/// Whether `j` directly depends on `i`: some tuple written by `i` is read by
/// `j` and no transaction committing between them overwrote it.
pub fn direct_dependency(history: &[HistoryEvent], i: TxnId, j: TxnId) -> Result<bool> {
    let index = HistoryIndex::new(history);
    let ti = index.committed(i)?;
    let tj = index.committed(j)?;
    if ti.commit >= tj.commit {
        return Ok(false);
    }
    let mut carried: BTreeSet<TupleId> = ti.writes.intersection(&tj.reads).copied().collect();
    for (_, tk) in index.commit_order() {
        if tk.commit > ti.commit && tk.commit < tj.commit {
            carried.retain(|o| !tk.writes.contains(o));
        }
    }
    Ok(!carried.is_empty())
}

pub fn build_precedence_graph(history: &[HistoryEvent]) -> Result<PrecedenceGraph> {
    let index = HistoryIndex::new(history);
    if let Some((&id, _)) = index.txns.iter().find(|(_, s)| s.commit.is_none() && !s.aborted) {
        return Err(Error::IncompleteHistory(id));
    }
    let mut pg = PrecedenceGraph::default();
    let mut last_writer: BTreeMap<TupleId, TxnId> = BTreeMap::new();
    for (id, s) in index.commit_order() {
        pg.nodes.insert(id);
        for o in &s.reads {
            if let Some(&w) = last_writer.get(o) {
                if w != id {
                    pg.edges.insert((w, id));
                }
            }
        }
        for &o in &s.writes {
            last_writer.insert(o, id);
        }
    }
    Ok(pg)
}

/// Every node reachable from a malicious node, minus the malicious nodes.
pub fn affected_closure(pg: &PrecedenceGraph, malicious: &BTreeSet<TxnId>) -> Result<BTreeSet<TxnId>> {
    if let Some(&m) = malicious.iter().find(|m| !pg.nodes.contains(m)) {
        return Err(Error::UnknownTransaction(m));
    }
    let mut seen: BTreeSet<TxnId> = malicious.clone();
    let mut queue: VecDeque<TxnId> = malicious.iter().copied().collect();
    while let Some(v) = queue.pop_front() {
        for w in pg.successors(v) {
            if seen.insert(w) {
                queue.push_back(w);
            }
        }
    }
    Ok(seen.difference(malicious).copied().collect())
}

/// History of transactions executed one after another, one tick each.
pub fn serial_history<'a>(txns: impl IntoIterator<Item = &'a TransactionSpec>) -> Vec<HistoryEvent> {
    let mut h = Vec::new();
    for (tick, t) in txns.into_iter().enumerate() {
        let tick = tick as u64;
        for op in t.ops() {
            let op = match op {
                Op::Read(o) => HistoryOp::Read(o),
                Op::Write(o) => HistoryOp::Write(o),
            };
            h.push(HistoryEvent::new(t.id, op, tick));
        }
        h.push(HistoryEvent::new(t.id, HistoryOp::Commit, tick));
    }
    h
}
