//! Sweeps attack intensity across recovery modes and prints the CSV.

use ibguard::engine::SimStrategy;
use ibguard::harness::{sweep, ExperimentGrid};
use ibguard::workload::WorkloadSpec;

fn main() -> ibguard::error::Result<()> {
    let grid = ExperimentGrid {
        k: vec![10],
        pi: vec![0.05, 0.10, 0.15],
        delta: vec![100],
        strategy: vec![SimStrategy::Bfa, SimStrategy::OneIb, SimStrategy::Itdb],
        seeds: vec![0, 1],
        workload: WorkloadSpec { m: 1000, n: 20_000, ..WorkloadSpec::default() },
        ..ExperimentGrid::default()
    };
    let out = sweep(&grid, None)?;
    out.write_csv(std::io::stdout().lock())?;
    out.check()
}
