//! A malicious deposit into X is read by a transfer X -> Y before the
//! detector fires. Recovery undoes both and re-executes the transfer.

use ibguard::engine::{SimConfig, Simulator};
use ibguard::model::{TransactionSpec, TupleId, TxnId, TxnKind};
use ibguard::partition::IBAssignment;

fn main() -> ibguard::error::Result<()> {
    let (x, y, z) = (TupleId(0), TupleId(1), TupleId(2));
    let txns = vec![
        TransactionSpec::malicious(TxnId(0), vec![x, z], 5_000),
        TransactionSpec::transfer(TxnId(1), TxnKind::Distribute, vec![x, y], 3_000),
    ];
    let a = IBAssignment::from_placement(&txns, 3, 1, vec![0, 0]);
    let cfg = SimConfig { delta: 50, k: 1, ..SimConfig::default() };
    let mut sim = Simulator::with_arrivals(txns, 3, 10_000, a, cfg, vec![0, 1])?;
    sim.run()?;
    for e in sim.trace() {
        println!("{:>4} {:?} {:?} {:?}", e.tick, e.kind, e.txn, e.tuples);
    }
    let r = &sim.recovery_reports()[0];
    println!("affected {:?}, undo {}, redo {}", r.at, r.undo_count, r.redo_count);
    println!("final balances {:?}", sim.store().balances());
    Ok(())
}
