#![allow(dead_code)]

use std::collections::BTreeMap;

use ibguard::engine::Simulator;
use ibguard::model::{TransactionSpec, TupleId};

/// Replays the benign transactions serially, in the order the engine
/// committed them, starting from the initial balances.
pub fn gold_state(txns: &[TransactionSpec], commit_order: &[ibguard::model::TxnId], n: usize, initial: i64) -> Vec<i64> {
    let mut db = vec![initial; n];
    for id in commit_order {
        let t = &txns[id.index()];
        if t.is_malicious() {
            continue;
        }
        let vals = t.execute(|o: TupleId| db[o.index()]);
        for (o, v) in vals {
            db[o.index()] = v;
        }
    }
    db
}

/// Tuples whose final value differs from the serial replay.
pub fn mismatches(sim: &Simulator) -> BTreeMap<TupleId, (i64, i64)> {
    let order: Vec<_> = sim.log().commits().iter().map(|c| c.txn).collect();
    let store = sim.store();
    let gold = gold_state(sim.transactions(), &order, store.len(), store.initial_balance());
    store
        .balances()
        .iter()
        .zip(&gold)
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .map(|(i, (a, b))| (TupleId(i as u32), (*a, *b)))
        .collect()
}

/// Recoveries whose affected set differs from the closure over the
/// precedence graph of the history their analysis saw.
pub fn at_mismatches(sim: &Simulator) -> Vec<String> {
    use std::collections::BTreeSet;
    use ibguard::model::{affected_closure, build_precedence_graph};
    let mut out = Vec::new();
    for plan in sim.recovery_plans() {
        let history = sim.log().history_through(plan.window_end_seq);
        let pg = build_precedence_graph(&history).expect("history is complete");
        let expected = affected_closure(&pg, &BTreeSet::from([plan.malicious_txn])).expect("malicious committed");
        let got: BTreeSet<_> = plan.affected.iter().copied().collect();
        if got != expected {
            let extra: Vec<_> = got.difference(&expected).collect();
            let missing: Vec<_> = expected.difference(&got).collect();
            out.push(format!("{}: extra {extra:?} missing {missing:?}", plan.malicious_txn));
        }
    }
    out
}

/// Recoveries with a redo of one of their affected transactions logged
/// between their first and last undo record.
pub fn phase_violations(sim: &Simulator) -> Vec<ibguard::model::TxnId> {
    use ibguard::engine::LogOp;
    let records = sim.log().records();
    let mut out = Vec::new();
    for plan in sim.recovery_plans() {
        let is_undo = |r: &&ibguard::engine::LogRecord| r.op == LogOp::Undo && r.txn_id == plan.malicious_txn;
        let (Some(first), Some(last)) = (records.iter().position(|r| is_undo(&r)), records.iter().rposition(|r| is_undo(&r))) else {
            continue;
        };
        if records[first..last].iter().any(|r| r.op == LogOp::Redo && plan.affected.contains(&r.txn_id)) {
            out.push(plan.malicious_txn);
        }
    }
    out
}
