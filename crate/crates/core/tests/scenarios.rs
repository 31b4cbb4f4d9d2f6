//! Small hand-traced runs covering admission, response, recovery and
//! coordination behaviour.

mod common;

use ibguard::engine::{EventKind, LogOp, SimConfig, SimStrategy, Simulator, SuspendReason};
use ibguard::error::Error;
use ibguard::model::{TransactionSpec, TupleId, TxnId, TxnKind};
use ibguard::partition::IBAssignment;

const INIT: i64 = 10_000;

fn o(i: u32) -> TupleId {
    TupleId(i)
}

fn malicious(id: u32, tuples: &[u32], tamper: i64) -> TransactionSpec {
    TransactionSpec::malicious(TxnId(id), tuples.iter().map(|&i| o(i)).collect(), tamper)
}

fn transfer(id: u32, tuples: &[u32], bp: u32) -> TransactionSpec {
    TransactionSpec::transfer(TxnId(id), TxnKind::Distribute, tuples.iter().map(|&i| o(i)).collect(), bp)
}

fn sim(txns: Vec<TransactionSpec>, n: usize, k: usize, ibs: Vec<u32>, arrivals: Vec<u64>, cfg: SimConfig) -> Simulator {
    let a = IBAssignment::from_placement(&txns, n, k, ibs);
    Simulator::with_arrivals(txns, n, INIT, a, cfg, arrivals).unwrap()
}

fn cfg(delta: u64) -> SimConfig {
    SimConfig { delta, k: 1, strategy: SimStrategy::Bfa, ..SimConfig::default() }
}

fn kinds(s: &Simulator, txn: u32) -> Vec<EventKind> {
    s.trace().iter().filter(|e| e.txn == Some(TxnId(txn))).map(|e| e.kind).collect()
}

fn tick_of(s: &Simulator, kind: EventKind, txn: u32) -> u64 {
    s.trace().iter().find(|e| e.kind == kind && e.txn == Some(TxnId(txn))).unwrap().tick
}

#[test]
fn empty_workload_completes_immediately() {
    let mut s = sim(vec![], 4, 1, vec![], vec![], cfg(0));
    assert!(matches!(s.step(), Err(Error::SimulationComplete)));
}

#[test]
fn single_benign_transaction() {
    let mut s = sim(vec![transfer(0, &[0, 1], 500)], 2, 1, vec![0], vec![3], cfg(5));
    let kinds: Vec<_> = s.step().unwrap().iter().map(|e| e.kind).collect();
    assert_eq!(kinds, vec![EventKind::Arrival, EventKind::Commit]);
    assert_eq!(s.log().records().len(), 4);
    assert!(matches!(s.step(), Err(Error::SimulationComplete)));
}

#[test]
fn motivating_attack_is_undone_and_redone() {
    // X = o0, Y = o1, o2 is untouched by benign work.
    let txns = vec![malicious(0, &[0, 2], 5_000), transfer(1, &[0, 1], 3_000)];
    let mut s = sim(txns, 3, 1, vec![0, 0], vec![0, 1], cfg(50));
    s.run().unwrap();
    assert!(tick_of(&s, EventKind::Commit, 1) < tick_of(&s, EventKind::Detection, 0));
    let writes: Vec<i64> = s.log().records().iter().filter(|r| r.txn_id == TxnId(1) && r.op == LogOp::Write).map(|r| r.after).collect();
    assert_eq!(writes, vec![10_500, 14_500]);
    assert_eq!(s.store().balances(), &[7_000, 13_000, INIT]);
    let r = &s.recovery_reports()[0];
    assert_eq!(r.at, vec![TxnId(1)]);
    assert_eq!(r.redo_count, 1);
    assert!(common::mismatches(&s).is_empty());
}

#[test]
fn undetected_independent_attack_restores_prior_values() {
    let txns = vec![malicious(0, &[0, 1], 700), transfer(1, &[2, 3], 1_000)];
    let mut s = sim(txns, 4, 1, vec![0, 0], vec![0, 1], cfg(10));
    s.run().unwrap();
    let r = &s.recovery_reports()[0];
    assert!(r.at.is_empty());
    assert_eq!(r.redo_count, 0);
    assert_eq!(&s.store().balances()[..2], &[INIT, INIT]);
    assert!(s.ctt().is_empty());
}

#[test]
fn response_without_later_commits_suspects_malicious_writes_only() {
    let mut s = sim(vec![malicious(0, &[4, 7], 100)], 8, 1, vec![0], vec![2], cfg(5));
    s.run().unwrap();
    let resp = s.trace().iter().find(|e| e.kind == EventKind::ResponseDone).unwrap();
    assert_eq!(resp.tuples, vec![o(4), o(7)]);
}

#[test]
fn response_is_confined_to_the_spanned_ibs() {
    let txns = vec![malicious(0, &[0, 1], 100), transfer(1, &[8, 9], 500), transfer(2, &[3, 4], 500)];
    let mut s = sim(txns, 10, 2, vec![0, 1, 0], vec![0, 1, 2], cfg(10));
    s.run().unwrap();
    let resp = s.trace().iter().find(|e| e.kind == EventKind::ResponseDone).unwrap();
    assert_eq!(resp.tuples, vec![o(0), o(1), o(3), o(4)]);
    let analysis = s.trace().iter().find(|e| e.kind == EventKind::AnalysisDone).unwrap();
    assert_eq!(analysis.tuples, vec![o(0), o(1)]);
    let signal = s.trace().iter().find(|e| e.kind == EventKind::Signal).unwrap();
    assert_eq!(signal.tuples, vec![o(3), o(4)]);
    assert!(common::mismatches(&s).is_empty());
}

#[test]
fn corrupted_read_waits_for_signal() {
    // t1 arrives after detection and reads a corrupted tuple.
    let txns = vec![malicious(0, &[0, 1], 100), transfer(1, &[1, 2], 500)];
    let c = SimConfig { undo_cost: 20, ..cfg(5) };
    let mut s = sim(txns, 3, 1, vec![0, 0], vec![0, 8], c);
    s.run().unwrap();
    let susp = s.trace().iter().find(|e| e.kind == EventKind::Suspended).unwrap();
    assert_eq!(susp.reason, Some(SuspendReason::Corrupted));
    assert!(tick_of(&s, EventKind::Commit, 1) >= tick_of(&s, EventKind::RecoveryPhaseDone, 0));
    assert_eq!(s.store().balances(), &[INIT, INIT - 500, INIT + 500]);
}

#[test]
fn blind_write_during_repair_is_excluded() {
    let over = TransactionSpec::overwrite(TxnId(1), vec![o(0), o(2)], 777);
    let txns = vec![malicious(0, &[0, 1], 100), over];
    let c = SimConfig { undo_cost: 100, ..cfg(5) };
    let mut s = sim(txns, 3, 1, vec![0, 0], vec![0, 20], c);
    s.run().unwrap();
    assert!(tick_of(&s, EventKind::Commit, 1) < tick_of(&s, EventKind::RecoveryPhaseDone, 0));
    assert_eq!(s.store().balances(), &[777, INIT, 777]);
    assert!(!s.log().records().iter().any(|r| r.op == LogOp::Undo && r.tuple == o(0)));
    assert!(s.ctt().is_empty());
    assert!(common::mismatches(&s).is_empty());
}

#[test]
fn blind_write_before_detection_needs_no_repair() {
    let over = TransactionSpec::overwrite(TxnId(1), vec![o(0), o(2)], 777);
    let txns = vec![malicious(0, &[0, 1], 100), over];
    let mut s = sim(txns, 3, 1, vec![0, 0], vec![0, 2], cfg(10));
    s.run().unwrap();
    let plan = s.recovery_plans().next().unwrap();
    assert!(!plan.corrupted.contains(&o(0)));
    assert_eq!(s.store().balances(), &[777, INIT, 777]);
}

#[test]
fn delayed_access_stops_two_hop_leak() {
    // o2 is shared between IB 0 and IB 1; t2 lives in IB 1.
    let txns = vec![malicious(0, &[0, 1], 900), transfer(1, &[1, 2], 1_000), transfer(2, &[2, 3], 1_000)];
    for delayed in [true, false] {
        let c = SimConfig { delayed_access: delayed, ..cfg(10) };
        let mut s = sim(txns.clone(), 4, 2, vec![0, 0, 1], vec![0, 1, 2], c);
        assert!(s.assignment().is_boundary(o(2)));
        s.run().unwrap();
        if delayed {
            assert!(s.leaks().is_empty(), "{:?}", s.leaks());
            assert_eq!(s.trace().iter().find(|e| e.kind == EventKind::Suspended).unwrap().reason, Some(SuspendReason::BoundaryLock));
        } else {
            assert_eq!(s.leaks().len(), 1);
            assert_eq!((s.leaks()[0].txn, s.leaks()[0].origin), (TxnId(2), TxnId(0)));
        }
        assert!(common::mismatches(&s).is_empty());
    }
}

#[test]
fn boundary_lock_releases_after_hold() {
    let txns = vec![transfer(0, &[0, 1], 100), transfer(1, &[1, 2], 100)];
    let c = SimConfig { delayed_access: true, ..cfg(10) };
    let mut s = sim(txns, 3, 2, vec![0, 1], vec![4, 5], c);
    s.run().unwrap();
    let rel = s.trace().iter().find(|e| e.kind == EventKind::BtRelease).unwrap();
    assert_eq!(rel.tick, 4 + 15);
    assert_eq!(tick_of(&s, EventKind::Commit, 1), 19);
    assert_eq!(kinds(&s, 1), vec![EventKind::Arrival, EventKind::Suspended, EventKind::Commit]);
}

#[test]
fn overlapping_recoveries_run_in_detection_order() {
    let txns = vec![malicious(0, &[0, 1], 100), malicious(1, &[1, 2], 100)];
    let c = SimConfig { undo_cost: 30, ..cfg(5) };
    let mut s = sim(txns, 3, 1, vec![0, 0], vec![0, 1], c);
    s.run().unwrap();
    assert!(tick_of(&s, EventKind::RecoveryDone, 0) <= tick_of(&s, EventKind::AnalysisDone, 1));
    assert_eq!(s.store().balances(), &[INIT; 3]);
}

#[test]
fn disjoint_recoveries_interleave() {
    let txns = vec![malicious(0, &[0, 1], 100), malicious(1, &[2, 3], 100)];
    let c = SimConfig { undo_cost: 30, ..cfg(5) };
    let mut s = sim(txns, 4, 2, vec![0, 1], vec![0, 1], c);
    s.run().unwrap();
    assert!(tick_of(&s, EventKind::AnalysisDone, 1) < tick_of(&s, EventKind::RecoveryDone, 0));
    assert_eq!(s.store().balances(), &[INIT; 4]);
}

#[test]
fn log_replay_rebuilds_store() {
    let txns = vec![malicious(0, &[0, 1], 300), transfer(1, &[1, 2], 2_000), transfer(2, &[2, 3], 2_000), transfer(3, &[0, 3], 500)];
    let mut s = sim(txns, 4, 1, vec![0; 4], vec![0, 1, 2, 3], cfg(3));
    s.run().unwrap();
    let mut db = vec![INIT; 4];
    let mut last = 0;
    for r in s.log().records() {
        assert!(r.commit_seq >= last);
        last = r.commit_seq;
        if r.op != LogOp::Read {
            assert_eq!(db[r.tuple.index()], r.before);
            db[r.tuple.index()] = r.after;
        }
    }
    assert_eq!(db, s.store().balances());
    assert!(common::mismatches(&s).is_empty());
}
