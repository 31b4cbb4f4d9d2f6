use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ibguard::engine::{read_trace, write_trace, SimStrategy};
use ibguard::error::Result;
use ibguard::harness::{self, ExperimentGrid, RunConfig, SimReport};
use ibguard::imr::RecoveryReport;
use ibguard::partition::{quality, IBAssignment, Strategy};
use ibguard::workload::{generate, WorkloadFile};

#[derive(Parser)]
#[command(version, about = "Isolation-block partitioning and attack recovery simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a banking workload with injected malicious transactions.
    GenWorkload(GenArgs),
    /// Partition a workload into k isolation blocks.
    Partition(PartitionArgs),
    /// Simulate a workload under attack and print the run report.
    Run(RunArgs),
    /// Run every cell of an experiment grid and write one CSV row per run.
    Sweep(SweepArgs),
    /// Recompute a run report from a saved trace.
    Report {
        #[arg(long)]
        trace: PathBuf,
    },
}

#[derive(Args)]
struct GenArgs {
    /// TOML/JSON file with a [workload] section; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    tx_max: Option<usize>,
    #[arg(long)]
    size_max: Option<usize>,
    #[arg(long)]
    group_size: Option<usize>,
    #[arg(long)]
    pi: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PartitionArgs {
    #[arg(long)]
    workload: PathBuf,
    #[arg(long)]
    strategy: Strategy,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    workload: PathBuf,
    /// Precomputed assignment; otherwise the strategy partitions the workload.
    #[arg(long)]
    assignment: Option<PathBuf>,
    /// TOML/JSON file with a [sim] section; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    strategy: Option<SimStrategy>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    delta: Option<u64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    no_delayed_access: bool,
    /// Write the JSONL event trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the transaction log as CSV here.
    #[arg(long)]
    log_csv: Option<PathBuf>,
    /// Write per-recovery reports as JSON here.
    #[arg(long)]
    recovery_report: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    grid: PathBuf,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::GenWorkload(a) => gen_workload(a),
        Cmd::Partition(a) => partition(a),
        Cmd::Run(a) => run(a),
        Cmd::Sweep(a) => sweep(a),
        Cmd::Report { trace } => {
            let events = read_trace(BufReader::new(File::open(trace)?))?;
            print_json(&SimReport::from_trace(&events)?)
        }
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn gen_workload(a: GenArgs) -> Result<()> {
    let mut spec = match &a.config {
        Some(p) => harness::load_config::<RunConfig>(p)?.workload,
        None => Default::default(),
    };
    spec.m = a.m.unwrap_or(spec.m);
    spec.n = a.n.unwrap_or(spec.n);
    spec.beta = a.beta.unwrap_or(spec.beta);
    spec.tx_max = a.tx_max.unwrap_or(spec.tx_max);
    spec.size_max = a.size_max.unwrap_or(spec.size_max);
    spec.group_size = a.group_size.unwrap_or(spec.group_size);
    spec.attack_intensity = a.pi.unwrap_or(spec.attack_intensity);
    spec.seed = a.seed.unwrap_or(spec.seed);
    let w = generate(&spec)?;
    WorkloadFile::save(&w, &a.out)?;
    eprintln!("{} transactions ({} malicious) -> {}", w.txns.len(), w.malicious_ids.len(), a.out.display());
    Ok(())
}

fn partition(a: PartitionArgs) -> Result<()> {
    let w = WorkloadFile::load(&a.workload)?;
    let assignment = a.strategy.assign(&w.txns, w.spec.n, a.k, a.seed)?;
    assignment.to_file().save(&a.out)?;
    print_json(&quality(&assignment, &w.txns)?)
}

fn run(a: RunArgs) -> Result<()> {
    let w = WorkloadFile::load(&a.workload)?;
    let mut cfg = match &a.config {
        Some(p) => harness::load_config::<RunConfig>(p)?.sim,
        None => Default::default(),
    };
    cfg.strategy = a.strategy.unwrap_or(cfg.strategy);
    cfg.k = a.k.unwrap_or(cfg.k);
    cfg.delta = a.delta.unwrap_or(cfg.delta);
    cfg.lambda = a.lambda.unwrap_or(cfg.lambda);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    if a.no_delayed_access {
        cfg.delayed_access = false;
    }
    let assignment = match &a.assignment {
        Some(p) => Some(IBAssignment::from_file(ibguard::partition::AssignmentFile::load(p)?, &w.txns)?),
        None => None,
    };
    let sim = harness::run(&w, assignment, &cfg)?;
    if let Some(p) = &a.trace {
        write_trace(sim.trace(), BufWriter::new(File::create(p)?))?;
    }
    if let Some(p) = &a.log_csv {
        sim.log().write_csv(BufWriter::new(File::create(p)?))?;
    }
    if let Some(p) = &a.recovery_report {
        RecoveryReport::save_all(sim.recovery_reports(), p)?;
    }
    print_json(&SimReport::from_trace(sim.trace())?)
}

fn sweep(a: SweepArgs) -> Result<()> {
    let grid: ExperimentGrid = harness::load_config(&a.grid)?;
    let outcome = harness::sweep(&grid, a.threads)?;
    match &a.out {
        Some(p) => outcome.write_csv(BufWriter::new(File::create(p)?))?,
        None => outcome.write_csv(io::stdout().lock())?,
    }
    for (c, msg) in &outcome.failed {
        eprintln!("run {} failed: {msg}", c.run_id);
    }
    outcome.check()
}
