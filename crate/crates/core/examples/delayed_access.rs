//! Counts cross-IB reads of corrupted data with and without delayed access.

use ibguard::engine::{SimConfig, SimStrategy, Simulator};
use ibguard::workload::{generate, WorkloadSpec};

fn main() -> ibguard::error::Result<()> {
    for seed in 0..5 {
        let w = generate(&WorkloadSpec { m: 400, n: 4000, beta: 0.5, group_size: 40, attack_intensity: 0.1, seed, ..WorkloadSpec::default() })?;
        let mut row = format!("seed {seed}:");
        for delayed in [true, false] {
            let cfg = SimConfig { k: 5, delta: 20, strategy: SimStrategy::Bfa, delayed_access: delayed, seed, ..SimConfig::default() };
            let mut sim = Simulator::from_workload(&w, &cfg)?;
            sim.run()?;
            row += &format!("  delayed={delayed} leaks={}", sim.leaks().len());
        }
        println!("{row}");
    }
    Ok(())
}
