use std::collections::BTreeSet;

use proptest::prelude::*;

use ibguard::model::{
    affected_closure, build_precedence_graph, serial_history, TransactionSpec, TupleId, TxnId, TxnKind,
};
use ibguard::partition::{quality, validate, Strategy as Heuristic};
use ibguard::workload::{generate, WorkloadSpec};

/// Random mix of transfers and blind writes over a small tuple domain.
fn arb_txns(max_txns: usize, domain: u32) -> impl Strategy<Value = Vec<TransactionSpec>> {
    let one = (proptest::collection::btree_set(0..domain, 2..4), any::<bool>());
    proptest::collection::vec(one, 1..max_txns).prop_map(|raw| {
        raw.into_iter()
            .enumerate()
            .map(|(i, (tuples, blind))| {
                let tuples: Vec<TupleId> = tuples.into_iter().map(TupleId).collect();
                if blind {
                    TransactionSpec::overwrite(TxnId(i as u32), tuples, 5)
                } else {
                    TransactionSpec::transfer(TxnId(i as u32), TxnKind::Distribute, tuples, 500)
                }
            })
            .collect()
    })
}

fn subset(ids: &[TxnId], mask: u64) -> BTreeSet<TxnId> {
    ids.iter().enumerate().filter(|(i, _)| mask >> (i % 64) & 1 == 1).map(|(_, &t)| t).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closure_is_union_of_single_closures(txns in arb_txns(16, 8), mask in any::<u64>()) {
        let pg = build_precedence_graph(&serial_history(&txns)).unwrap();
        let ids: Vec<TxnId> = txns.iter().map(|t| t.id).collect();
        let m = subset(&ids, mask);
        let mut union = BTreeSet::new();
        for &x in &m {
            union.extend(affected_closure(&pg, &BTreeSet::from([x])).unwrap());
        }
        let union: BTreeSet<_> = union.difference(&m).copied().collect();
        prop_assert_eq!(affected_closure(&pg, &m).unwrap(), union);
    }

    #[test]
    fn closure_is_monotone(txns in arb_txns(16, 8), a in any::<u64>(), b in any::<u64>()) {
        let pg = build_precedence_graph(&serial_history(&txns)).unwrap();
        let ids: Vec<TxnId> = txns.iter().map(|t| t.id).collect();
        let small = subset(&ids, a & b);
        let big = subset(&ids, a);
        let lhs = affected_closure(&pg, &small).unwrap();
        let mut rhs = affected_closure(&pg, &big).unwrap();
        rhs.extend(big.iter().copied());
        prop_assert!(lhs.is_subset(&rhs));
    }

    #[test]
    fn serial_edges_point_forward(txns in arb_txns(20, 6)) {
        let pg = build_precedence_graph(&serial_history(&txns)).unwrap();
        for &(i, j) in &pg.edges {
            prop_assert!(i.0 < j.0, "edge {i} -> {j}");
        }
    }

    #[test]
    fn fully_overwritten_reads_create_no_edge(txns in arb_txns(12, 6)) {
        let pg = build_precedence_graph(&serial_history(&txns)).unwrap();
        for &(i, j) in &pg.edges {
            // Some tuple j reads must have i as its last writer before j.
            let ti = &txns[i.index()];
            let tj = &txns[j.index()];
            let witnessed = tj.reads.iter().any(|o| {
                ti.writes.contains(o)
                    && !txns[i.index() + 1..j.index()].iter().any(|t| t.writes.contains(o))
            });
            prop_assert!(witnessed, "edge {i} -> {j} without a surviving write");
        }
    }

    #[test]
    fn heuristics_satisfy_constraints(seed in 0u64..500, k in 1usize..8, beta in 0.3f64..0.95) {
        let spec = WorkloadSpec { m: 60, n: 1_000, beta, group_size: 12, seed, attack_intensity: 0.05, ..WorkloadSpec::default() };
        let w = generate(&spec).unwrap();
        for s in [Heuristic::Bfa, Heuristic::Ba, Heuristic::Ra, Heuristic::Sa] {
            if s == Heuristic::Sa && k < 5 {
                continue;
            }
            let a = s.assign(&w.txns, spec.n, k, seed).unwrap();
            prop_assert!(validate(&a, &w.txns).unwrap().is_empty(), "{:?}", s);
            prop_assert_eq!(&a, &s.assign(&w.txns, spec.n, k, seed).unwrap());
            let q = quality(&a, &w.txns).unwrap();
            let weighted: u64 = a.tuple_ibs.iter().map(|ibs| ibs.len().saturating_sub(1) as u64).sum();
            prop_assert_eq!(q.f1_weighted, weighted);
            prop_assert!(q.fairness <= 1.0 + 1e-12);
            if k > 1 {
                prop_assert!(q.fairness > 1.0 / k as f64);
            }
            let counts = &q.ib_txn_counts;
            let equal = counts.iter().all(|&c| c == counts[0]);
            prop_assert_eq!(equal, (q.fairness - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn benign_transactions_conserve_money(seed in 0u64..1_000, balances in proptest::collection::vec(0i64..5_000_000, 400)) {
        let spec = WorkloadSpec { m: 40, n: 400, group_size: 8, seed, attack_intensity: 0.1, ..WorkloadSpec::default() };
        let w = generate(&spec).unwrap();
        for t in &w.txns {
            let before: i64 = t.writes.iter().map(|o| balances[o.index()]).sum();
            let after: i64 = t.execute(|o| balances[o.index()]).iter().map(|&(_, v)| v).sum();
            if t.is_malicious() {
                prop_assert_ne!(before, after);
            } else {
                prop_assert_eq!(before, after);
            }
        }
    }

    #[test]
    fn planned_dependencies_materialise(seed in 0u64..1_000) {
        let spec = WorkloadSpec { m: 80, n: 2_000, beta: 0.6, group_size: 16, seed, attack_intensity: 0.0, ..WorkloadSpec::default() };
        let w = generate(&spec).unwrap();
        let pg = build_precedence_graph(&serial_history(&w.txns)).unwrap();
        for &(i, j) in &w.planned_pg.edges {
            let reach = affected_closure(&pg, &BTreeSet::from([i])).unwrap();
            prop_assert!(reach.contains(&j), "planned {i} -> {j} not reachable");
        }
    }
}
