use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::config::SimConfig;
use super::ctt::{CorruptedTuplesTable, CttStatus};
use super::ids::Ids;
use super::log::{LogOp, LogRecord, TxnLog};
use super::store::Store;
use super::trace::{Event, EventKind, SuspendReason};
use crate::error::{Error, Result};
use crate::imr::{self, RecoveryPlan, RecoveryReport};
use crate::model::{TransactionSpec, TupleId, TxnId};
use crate::partition::{self, IBAssignment};
use crate::workload::Workload;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Executed { commit_seq: u64 },
    Suspended(SuspendReason),
}

/// A read of a tuple tainted by a malicious transaction, performed by a
/// transaction assigned to an IB the malicious one does not span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leak {
    pub txn: TxnId,
    pub origin: TxnId,
    pub tick: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Item {
    Detect,
    AnalysisDone(TxnId),
    UndoDone(TxnId),
    RedoDone(TxnId, usize),
    BtRelease(TupleId),
    Arrival(TxnId),
}

impl Item {
    fn class(self) -> u8 {
        match self {
            Item::Detect => 0,
            Item::AnalysisDone(_) | Item::UndoDone(_) | Item::RedoDone(..) => 1,
            Item::BtRelease(_) => 2,
            Item::Arrival(_) => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Queued,
    Analyzing,
    /// Analysis found corrupted tuples still being repaired by another recovery.
    Deferred(TxnId),
    Undoing,
    Redoing,
    Done,
}

#[derive(Debug, Clone)]
struct Recovery {
    ibs: BTreeSet<u32>,
    detect_tick: u64,
    phase: Phase,
    plan: Option<RecoveryPlan>,
    excluded: BTreeSet<TupleId>,
    blocked: u64,
}

pub struct Simulator {
    cfg: SimConfig,
    txns: Vec<TransactionSpec>,
    assignment: IBAssignment,
    store: Store,
    log: TxnLog,
    ctt: CorruptedTuplesTable,
    ids: Ids,
    queue: BTreeMap<(u64, u8, u64), Item>,
    queue_seq: u64,
    clock: u64,
    /// Active delayed-access locks per boundary tuple: (release tick, writer IB).
    bt_locks: BTreeMap<TupleId, Vec<(u64, u32)>>,
    ib_blocks: Vec<u32>,
    waiting: BTreeMap<TxnId, SuspendReason>,
    /// Suspended transactions indexed by what they wait on.
    tuple_waiters: BTreeMap<TupleId, BTreeSet<TxnId>>,
    ib_waiters: BTreeMap<u32, BTreeSet<TxnId>>,
    wake: BTreeSet<TxnId>,
    taint: Vec<BTreeSet<TxnId>>,
    spans: BTreeMap<TxnId, BTreeSet<u32>>,
    recoveries: BTreeMap<TxnId, Recovery>,
    detection_order: Vec<TxnId>,
    leaks: Vec<Leak>,
    reports: Vec<RecoveryReport>,
    trace: Vec<Event>,
    step_start: usize,
}

impl Simulator {
    /// Builds the assignment the configured strategy calls for and sets up a run.
    pub fn from_workload(workload: &Workload, cfg: &SimConfig) -> Result<Self> {
        let n = workload.spec.n;
        let assignment = match cfg.strategy.partition() {
            Some(s) => s.assign(&workload.txns, n, cfg.k, cfg.seed)?,
            None => single_ib(&workload.txns, n),
        };
        Simulator::new(workload.txns.clone(), n, workload.spec.initial_balance, assignment, cfg.clone())
    }

    pub fn new(
        txns: Vec<TransactionSpec>,
        n: usize,
        initial_balance: i64,
        assignment: IBAssignment,
        cfg: SimConfig,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let exp = Exp::new(cfg.lambda).map_err(|e| Error::Config(e.to_string()))?;
        let mut t = 0.0f64;
        let arrivals = (0..txns.len())
            .map(|_| {
                t += exp.sample(&mut rng);
                t.floor() as u64
            })
            .collect();
        Simulator::with_arrivals(txns, n, initial_balance, assignment, cfg, arrivals)
    }

    /// Like [`Simulator::new`] but with explicit arrival ticks, one per transaction.
    pub fn with_arrivals(
        txns: Vec<TransactionSpec>,
        n: usize,
        initial_balance: i64,
        assignment: IBAssignment,
        cfg: SimConfig,
        arrivals: Vec<u64>,
    ) -> Result<Self> {
        cfg.validate()?;
        if arrivals.len() != txns.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} arrival ticks for {} transactions",
                arrivals.len(),
                txns.len()
            )));
        }
        for (i, t) in txns.iter().enumerate() {
            if t.id.index() != i {
                return Err(Error::InvalidWorkload(format!("transaction at position {i} has id {}", t.id)));
            }
            t.check(n)?;
        }
        if assignment.n() != n || assignment.txn_ib.len() != txns.len() {
            return Err(Error::DimensionMismatch(format!(
                "assignment covers {} tuples and {} transactions, workload has {n} and {}",
                assignment.n(),
                assignment.txn_ib.len(),
                txns.len()
            )));
        }
        // An IB nobody uses is harmless at run time; every other constraint must hold.
        let violations: Vec<_> = partition::validate(&assignment, &txns)?
            .into_iter()
            .filter(|v| v.constraint != partition::Constraint::C5)
            .collect();
        if let Some(first) = violations.first() {
            return Err(Error::InvalidAssignment { count: violations.len(), first: first.to_string() });
        }
        let q = partition::quality_unchecked(&assignment);
        let spans = txns
            .iter()
            .filter(|t| t.is_malicious())
            .map(|t| (t.id, assignment.ibs_of(t.tuples().iter())))
            .collect();

        let mut sim = Simulator {
            ids: Ids::new(cfg.delta, cfg.seed).with_error_rates(cfg.false_positive_rate, cfg.false_negative_rate),
            store: Store::new(n, initial_balance),
            log: TxnLog::new(n, txns.len()),
            ctt: CorruptedTuplesTable::default(),
            queue: BTreeMap::new(),
            queue_seq: 0,
            clock: 0,
            bt_locks: BTreeMap::new(),
            ib_blocks: vec![0; assignment.k],
            waiting: BTreeMap::new(),
            tuple_waiters: BTreeMap::new(),
            ib_waiters: BTreeMap::new(),
            wake: BTreeSet::new(),
            taint: vec![BTreeSet::new(); n],
            spans,
            recoveries: BTreeMap::new(),
            detection_order: Vec::new(),
            leaks: Vec::new(),
            reports: Vec::new(),
            trace: Vec::new(),
            step_start: 0,
            txns,
            assignment,
            cfg,
        };
        let mut info = Event::new(0, EventKind::RunInfo);
        info.boundary = Some(q.boundary_tuples.len() as u64);
        info.fairness = Some(q.fairness);
        sim.trace.push(info);

        for (i, tick) in arrivals.into_iter().enumerate() {
            sim.schedule(tick, Item::Arrival(TxnId(i as u32)));
        }
        Ok(sim)
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn assignment(&self) -> &IBAssignment {
        &self.assignment
    }

    pub fn transactions(&self) -> &[TransactionSpec] {
        &self.txns
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn log(&self) -> &TxnLog {
        &self.log
    }

    pub fn ctt(&self) -> &CorruptedTuplesTable {
        &self.ctt
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn trace(&self) -> &[Event] {
        &self.trace
    }

    pub fn leaks(&self) -> &[Leak] {
        &self.leaks
    }

    pub fn recovery_reports(&self) -> &[RecoveryReport] {
        &self.reports
    }

    /// Plans of every recovery that finished its analysis, by malicious transaction.
    pub fn recovery_plans(&self) -> impl Iterator<Item = &RecoveryPlan> {
        self.recoveries.values().filter_map(|r| r.plan.as_ref())
    }

    /// Transactions still suspended.
    pub fn waiting(&self) -> Vec<TxnId> {
        self.waiting.keys().copied().collect()
    }

    pub fn is_done(&self) -> bool {
        self.queue.is_empty()
    }

    fn schedule(&mut self, tick: u64, item: Item) {
        self.queue_seq += 1;
        self.queue.insert((tick, item.class(), self.queue_seq), item);
    }

    fn emit(&mut self, e: Event) {
        self.trace.push(e);
    }

    /// Processes the next queued event and any retries it unblocks; returns
    /// the trace lines produced.
    pub fn step(&mut self) -> Result<&[Event]> {
        let Some(((tick, _, _), item)) = self.queue.pop_first() else {
            return Err(Error::SimulationComplete);
        };
        self.step_start = self.trace.len();
        self.clock = tick;
        match item {
            Item::Arrival(t) => {
                self.emit(Event::new(tick, EventKind::Arrival).txn(t));
                self.try_admit(t)?;
            }
            Item::BtRelease(o) => self.release_boundary(o),
            Item::Detect => self.detect()?,
            Item::AnalysisDone(m) => self.finish_analysis(m)?,
            Item::UndoDone(m) => self.finish_undo(m),
            Item::RedoDone(m, i) => self.finish_redo(m, i),
        }
        while !self.wake.is_empty() {
            for t in std::mem::take(&mut self.wake) {
                if self.waiting.contains_key(&t) {
                    self.try_admit(t)?;
                }
            }
        }
        Ok(&self.trace[self.step_start..])
    }

    pub fn run(&mut self) -> Result<()> {
        while !self.queue.is_empty() {
            self.step()?;
        }
        Ok(())
    }

    /// Admission control in order: boundary locks, corrupted reads, IB locks.
    pub fn admit(&self, t: TxnId) -> Admission {
        let spec = &self.txns[t.index()];
        let my_ib = self.assignment.txn_ib[t.index()];
        let now = self.clock;
        let locked = |o: &TupleId| {
            self.bt_locks
                .get(o)
                .is_some_and(|ls| ls.iter().any(|&(until, ib)| until > now && ib != my_ib))
        };
        if spec.reads.iter().chain(&spec.writes).any(locked) {
            return Admission::Suspended(SuspendReason::BoundaryLock);
        }
        if spec.reads.iter().any(|o| self.ctt.contains(*o)) {
            return Admission::Suspended(SuspendReason::Corrupted);
        }
        if spec
            .reads
            .iter()
            .chain(&spec.writes)
            .any(|o| self.assignment.tuple_ibs[o.index()].iter().any(|&ib| self.ib_blocks[ib as usize] > 0))
        {
            return Admission::Suspended(SuspendReason::IbLock);
        }
        Admission::Executed { commit_seq: self.store.commit_seq + 1 }
    }

    fn try_admit(&mut self, t: TxnId) -> Result<()> {
        match self.admit(t) {
            Admission::Executed { .. } => {
                self.waiting.remove(&t);
                self.execute(t);
            }
            Admission::Suspended(reason) => {
                self.register_waiter(t, reason);
                if self.waiting.insert(t, reason) != Some(reason) {
                    let mut e = Event::new(self.clock, EventKind::Suspended).txn(t);
                    e.reason = Some(reason);
                    self.emit(e);
                    for r in self.recoveries.values_mut().filter(|r| r.phase != Phase::Done) {
                        r.blocked += 1;
                    }
                }
            }
        }
        Ok(())
    }

    fn execute(&mut self, t: TxnId) {
        let now = self.clock;
        let spec = self.txns[t.index()].clone();
        for &o in &spec.writes {
            if self.ctt.contains(o) {
                for h in self.ctt.evict(o) {
                    if let Some(r) = self.recoveries.get_mut(&h) {
                        r.excluded.insert(o);
                    }
                }
                self.wake_tuple(o);
            }
        }
        let values = spec.execute(|o| self.store.get(o));
        let seq = self.store.next_seq();
        let mut records = Vec::with_capacity(spec.reads.len() + values.len());
        for &o in &spec.reads {
            let v = self.store.get(o);
            records.push(LogRecord { txn_id: t, tuple: o, op: LogOp::Read, before: v, after: v, tick: now, commit_seq: seq });
        }
        for &(o, v) in &values {
            let before = self.store.get(o);
            records.push(LogRecord { txn_id: t, tuple: o, op: LogOp::Write, before, after: v, tick: now, commit_seq: seq });
            self.store.set(o, v);
        }
        self.log.append_commit(t, seq, now, records);

        let origins: BTreeSet<TxnId> = spec.reads.iter().flat_map(|o| self.taint[o.index()].iter().copied()).collect();
        let my_ib = self.assignment.txn_ib[t.index()];
        for &h in &origins {
            if self.spans.get(&h).is_some_and(|s| !s.contains(&my_ib)) {
                self.leaks.push(Leak { txn: t, origin: h, tick: now });
            }
        }
        for &o in &spec.writes {
            self.taint[o.index()] = if spec.is_malicious() { BTreeSet::from([t]) } else { origins.clone() };
        }
        self.emit(Event::new(now, EventKind::Commit).txn(t).tuples(spec.writes.iter().copied()));

        let hold = self.cfg.boundary_hold();
        if self.cfg.holds_boundary() && hold > 0 {
            for &o in &spec.writes {
                if self.assignment.is_boundary(o) {
                    self.bt_locks.entry(o).or_default().push((now + hold, my_ib));
                    self.schedule(now + hold, Item::BtRelease(o));
                }
            }
        }
        if let Some(at) = self.ids.on_commit(t, spec.is_malicious(), seq, now) {
            self.schedule(at, Item::Detect);
        }
    }

    fn register_waiter(&mut self, t: TxnId, reason: SuspendReason) {
        let spec = &self.txns[t.index()];
        match reason {
            SuspendReason::BoundaryLock => {
                for &o in spec.reads.iter().chain(&spec.writes) {
                    self.tuple_waiters.entry(o).or_default().insert(t);
                }
            }
            SuspendReason::Corrupted => {
                for &o in &spec.reads {
                    self.tuple_waiters.entry(o).or_default().insert(t);
                }
            }
            SuspendReason::IbLock => {
                for o in spec.reads.iter().chain(&spec.writes) {
                    for &ib in &self.assignment.tuple_ibs[o.index()] {
                        self.ib_waiters.entry(ib).or_default().insert(t);
                    }
                }
            }
        }
    }

    fn wake_tuple(&mut self, o: TupleId) {
        if let Some(ws) = self.tuple_waiters.remove(&o) {
            self.wake.extend(ws);
        }
    }

    fn release_boundary(&mut self, o: TupleId) {
        let now = self.clock;
        let Some(ls) = self.bt_locks.get_mut(&o) else { return };
        let before = ls.len();
        ls.retain(|&(until, _)| until > now);
        if ls.len() == before {
            return;
        }
        if ls.is_empty() {
            self.bt_locks.remove(&o);
        }
        self.emit(Event::new(now, EventKind::BtRelease).tuples([o]));
        self.wake_tuple(o);
    }
}

impl Simulator {
    fn detect(&mut self) -> Result<()> {
        let now = self.clock;
        for d in self.ids.report(now) {
            let m = d.malicious_txn;
            if self.recoveries.contains_key(&m) {
                continue;
            }
            self.emit(Event::new(now, EventKind::Detection).txn(m));
            let resp = imr::respond(&self.log, &self.txns, &self.assignment, &d)?;
            for &o in &resp.suspected {
                self.ctt.add(o, CttStatus::Suspected, m, now);
            }
            self.emit(Event::new(now, EventKind::ResponseDone).txn(m).tuples(resp.suspected.iter().copied()));
            self.recoveries.insert(
                m,
                Recovery {
                    ibs: resp.spanned_ibs,
                    detect_tick: now,
                    phase: Phase::Queued,
                    plan: None,
                    excluded: BTreeSet::new(),
                    blocked: 0,
                },
            );
            self.detection_order.push(m);
        }
        self.start_recoveries();
        Ok(())
    }

    /// Starts every queued recovery with no unfinished, overlapping
    /// predecessor in detection order. `detection_order` only holds
    /// unfinished recoveries.
    fn start_recoveries(&mut self) {
        for i in 0..self.detection_order.len() {
            let m = self.detection_order[i];
            if self.recoveries[&m].phase != Phase::Queued {
                continue;
            }
            let ibs = &self.recoveries[&m].ibs;
            if self.detection_order[..i].iter().any(|p| !self.recoveries[p].ibs.is_disjoint(ibs)) {
                continue;
            }
            if self.blocks_admission() {
                for &ib in &self.recoveries[&m].ibs.clone() {
                    self.ib_blocks[ib as usize] += 1;
                }
            }
            self.recoveries.get_mut(&m).unwrap().phase = Phase::Analyzing;
            self.schedule_analysis(m);
        }
    }

    fn blocks_admission(&self) -> bool {
        self.cfg.strategy != super::SimStrategy::Itdb
    }

    fn schedule_analysis(&mut self, m: TxnId) {
        let seq = self.log.commit_of(m).map_or(0, |c| c.seq);
        let records = self.log.records_since(seq.saturating_sub(1)) as u64;
        let passes = if self.cfg.strategy == super::SimStrategy::Itdb { self.cfg.itdb_passes } else { 1 };
        let ticks = records.div_ceil(self.cfg.scan_rate) * passes;
        self.schedule(self.clock + ticks, Item::AnalysisDone(m));
    }

    fn finish_analysis(&mut self, m: TxnId) -> Result<()> {
        let now = self.clock;
        let plan = imr::plan_recovery(&self.log, &self.txns, m, self.store.initial_balance())?;
        let conflict = self.recoveries.iter().find_map(|(&other, r)| {
            let busy = matches!(r.phase, Phase::Undoing | Phase::Redoing);
            let overlaps = r.plan.as_ref().is_some_and(|p| !p.corrupted.is_disjoint(&plan.corrupted));
            (other != m && busy && overlaps).then_some(other)
        });
        if let Some(other) = conflict {
            self.recoveries.get_mut(&m).unwrap().phase = Phase::Deferred(other);
            return Ok(());
        }

        self.log.void_versions(m, self.txns[m.index()].writes.iter().copied());
        for &(t, o, v) in &plan.rewrites {
            self.log.rewrite_version(t, o, v);
        }
        let mut released = Vec::new();
        for o in self.ctt.held_by(m) {
            if !plan.corrupted.contains(&o) && self.ctt.release(o, m) {
                released.push(o);
            }
        }
        for &o in &plan.corrupted {
            self.ctt.add(o, CttStatus::Confirmed, m, now);
        }
        let mut e = Event::new(now, EventKind::AnalysisDone).txn(m).tuples(plan.corrupted.iter().copied());
        e.txns = plan.affected.clone();
        self.emit(e);
        self.signal(m, released);

        let undo_ticks = self.cfg.undo_cost * plan.undo.len() as u64;
        let unblock = self.blocks_admission();
        let r = self.recoveries.get_mut(&m).unwrap();
        r.excluded.clear();
        r.phase = Phase::Undoing;
        r.plan = Some(plan);
        if unblock {
            for ib in r.ibs.clone() {
                self.ib_blocks[ib as usize] -= 1;
                if let Some(ws) = self.ib_waiters.remove(&ib) {
                    self.wake.extend(ws);
                }
            }
        }
        self.schedule(now + undo_ticks, Item::UndoDone(m));
        Ok(())
    }

    fn finish_undo(&mut self, m: TxnId) {
        let now = self.clock;
        let plan = self.recoveries[&m].plan.clone().expect("undo without plan");
        self.install(m, m, LogOp::Undo, &plan.undo);
        let released: Vec<TupleId> =
            plan.release_after_undo.iter().copied().filter(|&o| self.ctt.release(o, m)).collect();
        let mut e = Event::new(now, EventKind::RecoveryPhaseDone).txn(m);
        e.phase = Some(1);
        self.emit(e);
        self.signal(m, released);
        if plan.redo.is_empty() {
            self.finish(m);
        } else {
            self.recoveries.get_mut(&m).unwrap().phase = Phase::Redoing;
            self.schedule(now + self.cfg.redo_cost, Item::RedoDone(m, 0));
        }
    }

    fn finish_redo(&mut self, m: TxnId, i: usize) {
        let now = self.clock;
        let step = self.recoveries[&m].plan.as_ref().expect("redo without plan").redo[i].clone();
        let last = i + 1 == self.recoveries[&m].plan.as_ref().unwrap().redo.len();
        self.install(m, step.txn, LogOp::Redo, &step.writes);
        let released: Vec<TupleId> = step.releases.iter().copied().filter(|&o| self.ctt.release(o, m)).collect();
        self.signal(m, released);
        if last {
            let mut e = Event::new(now, EventKind::RecoveryPhaseDone).txn(m);
            e.phase = Some(2);
            self.emit(e);
            self.finish(m);
        } else {
            self.schedule(now + self.cfg.redo_cost, Item::RedoDone(m, i + 1));
        }
    }

    fn install(&mut self, m: TxnId, owner: TxnId, op: LogOp, writes: &[(TupleId, i64)]) {
        let excluded = &self.recoveries[&m].excluded;
        let writes: Vec<(TupleId, i64)> = writes.iter().copied().filter(|(o, _)| !excluded.contains(o)).collect();
        for (o, v) in writes {
            let before = self.store.get(o);
            self.store.set(o, v);
            let seq = self.store.next_seq();
            self.log.append_compensation(LogRecord {
                txn_id: owner,
                tuple: o,
                op,
                before,
                after: v,
                tick: self.clock,
                commit_seq: seq,
            });
            self.taint[o.index()].remove(&m);
        }
    }

    fn signal(&mut self, m: TxnId, released: Vec<TupleId>) {
        if !released.is_empty() {
            for &o in &released {
                self.wake_tuple(o);
            }
            self.emit(Event::new(self.clock, EventKind::Signal).txn(m).tuples(released));
        }
    }

    fn finish(&mut self, m: TxnId) {
        let now = self.clock;
        let leftover: Vec<TupleId> = self.ctt.held_by(m).into_iter().filter(|&o| self.ctt.release(o, m)).collect();
        self.signal(m, leftover);
        self.detection_order.retain(|&d| d != m);
        let r = self.recoveries.get_mut(&m).unwrap();
        r.phase = Phase::Done;
        let plan = r.plan.as_ref().unwrap();
        self.reports.push(RecoveryReport {
            malicious_txn: m,
            at: plan.affected.clone(),
            undo_count: plan.undo.len(),
            redo_count: plan.redo.len(),
            start_tick: r.detect_tick,
            end_tick: now,
            blocked_txns: r.blocked,
        });
        self.emit(Event::new(now, EventKind::RecoveryDone).txn(m));
        let deferred: Vec<TxnId> = self
            .recoveries
            .iter()
            .filter(|(_, r)| r.phase == Phase::Deferred(m))
            .map(|(&d, _)| d)
            .collect();
        for d in deferred {
            self.recoveries.get_mut(&d).unwrap().phase = Phase::Analyzing;
            self.schedule_analysis(d);
        }
        self.start_recoveries();
    }
}

fn single_ib(txns: &[TransactionSpec], n: usize) -> IBAssignment {
    IBAssignment::from_placement(txns, n, 1, vec![0; txns.len()])
}
