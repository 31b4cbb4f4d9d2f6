//! Generates a workload and summarises its dependency structure.

use ibguard::workload::{generate, scale_summary, WorkloadSpec};

fn main() -> ibguard::error::Result<()> {
    let spec = WorkloadSpec { m: 1000, n: 20_000, beta: 0.75, attack_intensity: 0.05, seed: 1, ..WorkloadSpec::default() };
    let w = generate(&spec)?;
    let s = scale_summary(&w);
    let pairs: u64 = w.group_stats.iter().map(|g| g.pairs).sum();
    let candidates: u64 = w.group_stats.iter().map(|g| g.candidates).sum();
    println!("transactions      {}", w.txns.len());
    println!("malicious         {}", w.malicious_ids.len());
    println!("planned edges     {}", w.planned_pg.edges.len());
    println!("edge probability  {:.4}", candidates as f64 / pairs as f64);
    println!("realised edges    {}", s.edges);
    println!("shared tuples     {}", s.shared_tuples);
    println!("mean size         {:.2}", s.mean_size);
    Ok(())
}
