//! Compares the partitioning heuristics on one generated workload.

use ibguard::partition::{quality, Strategy};
use ibguard::workload::{generate, WorkloadSpec};

fn main() -> ibguard::error::Result<()> {
    let w = generate(&WorkloadSpec { m: 2000, n: 40_000, seed: 7, ..WorkloadSpec::default() })?;
    println!("{:<6} {:>3} {:>9} {:>9}", "algo", "k", "boundary", "fairness");
    for k in [5, 10] {
        for s in [Strategy::Bfa, Strategy::Ba, Strategy::Ra, Strategy::Sa] {
            let q = quality(&s.assign(&w.txns, w.spec.n, k, 7)?, &w.txns)?;
            println!("{:<6} {:>3} {:>9} {:>9.3}", format!("{s:?}"), k, q.f1_simple, q.fairness);
        }
    }
    Ok(())
}
