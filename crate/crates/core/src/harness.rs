//! Experiment plumbing: config files, single runs, parameter sweeps and
//! the metrics derived from a run's trace.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{Event, EventKind, SimConfig, SimStrategy, Simulator};
use crate::error::{Error, Result};
use crate::partition::IBAssignment;
use crate::workload::{generate, Workload, WorkloadSpec};

/// Commits are averaged over windows of this many ticks.
pub const THROUGHPUT_WINDOW: u64 = 1000;

pub const CSV_HEADER: [&str; 13] = [
    "run_id", "seed", "strategy", "k", "pi", "delta", "lambda", "affected", "blocked", "mean_recovery",
    "mean_response", "boundary", "fairness",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    /// Sum of affected-set sizes over all analysed detections.
    pub affected_count: u64,
    /// Suspension episodes; a transaction suspended twice counts twice.
    pub blocked_count: u64,
    pub mean_recovery_ticks: Option<f64>,
    pub mean_response_ticks: Option<f64>,
    pub throughput: f64,
    pub boundary_tuples: u64,
    pub fairness: f64,
    pub commits: u64,
    pub detections: u64,
    pub end_tick: u64,
    pub histogram: BTreeMap<String, u64>,
}

impl SimReport {
    /// Recomputes every metric from the event trace.
    pub fn from_trace(events: &[Event]) -> Result<Self> {
        let info = events
            .iter()
            .find(|e| e.kind == EventKind::RunInfo)
            .ok_or_else(|| Error::Parse("trace has no run_info line".into()))?;
        let mut histogram = BTreeMap::new();
        let mut arrivals = BTreeMap::new();
        let mut detected = BTreeMap::new();
        let (mut affected, mut blocked, mut commits) = (0u64, 0u64, 0u64);
        let (mut response_sum, mut recovery_sum, mut recoveries) = (0u64, 0u64, 0u64);
        let mut last_commit = 0;
        for e in events {
            let name = serde_json::to_value(e.kind)?.as_str().unwrap_or_default().to_string();
            *histogram.entry(name).or_insert(0) += 1;
            match e.kind {
                EventKind::Arrival => {
                    arrivals.insert(e.txn, e.tick);
                }
                EventKind::Suspended => blocked += 1,
                EventKind::Commit => {
                    commits += 1;
                    last_commit = e.tick;
                    let arrived = arrivals
                        .get(&e.txn)
                        .ok_or_else(|| Error::Parse(format!("commit of {:?} before its arrival", e.txn)))?;
                    response_sum += e.tick - arrived;
                }
                EventKind::Detection => {
                    detected.insert(e.txn, e.tick);
                }
                EventKind::AnalysisDone => affected += e.txns.len() as u64,
                EventKind::RecoveryDone => {
                    let d = detected
                        .get(&e.txn)
                        .ok_or_else(|| Error::Parse(format!("recovery of {:?} without detection", e.txn)))?;
                    recovery_sum += e.tick - d;
                    recoveries += 1;
                }
                _ => {}
            }
        }
        let mean = |sum: u64, n: u64| (n > 0).then(|| sum as f64 / n as f64);
        let windows = last_commit / THROUGHPUT_WINDOW + 1;
        Ok(SimReport {
            affected_count: affected,
            blocked_count: blocked,
            mean_recovery_ticks: mean(recovery_sum, recoveries),
            mean_response_ticks: mean(response_sum, commits),
            throughput: commits as f64 / windows as f64,
            boundary_tuples: info.boundary.unwrap_or(0),
            fairness: info.fairness.unwrap_or(1.0),
            commits,
            detections: detected.len() as u64,
            end_tick: events.last().map_or(0, |e| e.tick),
            histogram,
        })
    }
}

/// A workload and a simulation configuration read from one TOML or JSON file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub workload: WorkloadSpec,
    pub sim: SimConfig,
}

/// Parses TOML when the extension is `.toml`, JSON otherwise.
pub fn load_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    } else {
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Simulates to completion. With `assignment` the strategy in `cfg` only
/// selects the recovery mode.
pub fn run(workload: &Workload, assignment: Option<IBAssignment>, cfg: &SimConfig) -> Result<Simulator> {
    let mut sim = match assignment {
        Some(a) => Simulator::new(workload.txns.clone(), workload.spec.n, workload.spec.initial_balance, a, cfg.clone())?,
        None => Simulator::from_workload(workload, cfg)?,
    };
    sim.run()?;
    Ok(sim)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentGrid {
    pub k: Vec<usize>,
    pub pi: Vec<f64>,
    pub delta: Vec<u64>,
    pub lambda: Vec<f64>,
    pub strategy: Vec<SimStrategy>,
    pub seeds: Vec<u64>,
    /// Base values for everything the axes do not cover.
    pub workload: WorkloadSpec,
    pub sim: SimConfig,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        let sim = SimConfig::default();
        let workload = WorkloadSpec::default();
        ExperimentGrid {
            k: vec![sim.k],
            pi: vec![workload.attack_intensity],
            delta: vec![sim.delta],
            lambda: vec![sim.lambda],
            strategy: vec![sim.strategy],
            seeds: vec![0],
            workload,
            sim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub run_id: usize,
    pub seed: u64,
    pub strategy: SimStrategy,
    pub k: usize,
    pub pi: f64,
    pub delta: u64,
    pub lambda: f64,
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        let axes = [
            ("k", self.k.len()),
            ("pi", self.pi.len()),
            ("delta", self.delta.len()),
            ("lambda", self.lambda.len()),
            ("strategy", self.strategy.len()),
            ("seeds", self.seeds.len()),
        ];
        if let Some((name, _)) = axes.iter().find(|(_, len)| *len == 0) {
            return Err(Error::Config(format!("grid axis `{name}` is empty")));
        }
        for c in self.cells() {
            self.sim_config(&c).validate()?;
            self.workload_spec(&c).validate()?;
        }
        Ok(())
    }

    /// Cartesian product, seeds varying fastest.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &pi in &self.pi {
            for &delta in &self.delta {
                for &lambda in &self.lambda {
                    for &k in &self.k {
                        for &strategy in &self.strategy {
                            for &seed in &self.seeds {
                                out.push(Cell { run_id: out.len(), seed, strategy, k, pi, delta, lambda });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn workload_spec(&self, c: &Cell) -> WorkloadSpec {
        WorkloadSpec { seed: c.seed, attack_intensity: c.pi, ..self.workload.clone() }
    }

    pub fn sim_config(&self, c: &Cell) -> SimConfig {
        SimConfig { seed: c.seed, strategy: c.strategy, k: c.k, delta: c.delta, lambda: c.lambda, ..self.sim.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<(Cell, SimReport)>,
    pub failed: Vec<(Cell, String)>,
}

impl SweepOutcome {
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(CSV_HEADER).map_err(err)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for (c, r) in &self.rows {
            w.write_record([
                c.run_id.to_string(),
                c.seed.to_string(),
                c.strategy.to_string(),
                c.k.to_string(),
                c.pi.to_string(),
                c.delta.to_string(),
                c.lambda.to_string(),
                r.affected_count.to_string(),
                r.blocked_count.to_string(),
                opt(r.mean_recovery_ticks),
                opt(r.mean_response_ticks),
                r.boundary_tuples.to_string(),
                r.fairness.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Errors with the list of failed cells, if any.
    pub fn check(&self) -> Result<()> {
        match self.failed.first() {
            None => Ok(()),
            Some((c, msg)) => Err(Error::PartialFailure {
                failed: self.failed.len(),
                first: format!("run {}: {msg}", c.run_id),
            }),
        }
    }
}

/// Runs every cell, in parallel when `threads` is not 1. Row order follows
/// `run_id` regardless of scheduling.
pub fn sweep(grid: &ExperimentGrid, threads: Option<usize>) -> Result<SweepOutcome> {
    grid.validate()?;
    let cells = grid.cells();
    let run_cell = |c: &Cell| -> Result<SimReport> {
        let w = generate(&grid.workload_spec(c))?;
        let sim = run(&w, None, &grid.sim_config(c))?;
        SimReport::from_trace(sim.trace())
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<Result<SimReport>> = pool.install(|| cells.par_iter().map(run_cell).collect());
    let mut outcome = SweepOutcome { rows: Vec::new(), failed: Vec::new() };
    for (c, r) in cells.into_iter().zip(results) {
        match r {
            Ok(rep) => outcome.rows.push((c, rep)),
            Err(e) => outcome.failed.push((c, e.to_string())),
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_grid() -> ExperimentGrid {
        ExperimentGrid {
            k: vec![3],
            pi: vec![0.05],
            delta: vec![5],
            lambda: vec![1.0],
            strategy: vec![SimStrategy::Bfa],
            seeds: vec![7],
            workload: WorkloadSpec { m: 60, n: 600, group_size: 10, ..WorkloadSpec::default() },
            sim: SimConfig::default(),
        }
    }

    #[test]
    fn one_cell_one_row() {
        let out = sweep(&tiny_grid(), Some(1)).unwrap();
        assert_eq!(out.rows.len(), 1);
        let mut buf = Vec::new();
        out.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    }

    #[test]
    fn cells_enumerate_in_fixed_order() {
        let g = ExperimentGrid { k: vec![1, 5], seeds: vec![1, 2, 3], ..tiny_grid() };
        let cells = g.cells();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells.iter().map(|c| (c.k, c.seed)).collect::<Vec<_>>(), vec![(1, 1), (1, 2), (1, 3), (5, 1), (5, 2), (5, 3)]);
        assert!(cells.iter().enumerate().all(|(i, c)| c.run_id == i));
    }

    #[test]
    fn empty_axis_rejected() {
        let g = ExperimentGrid { seeds: vec![], ..tiny_grid() };
        assert!(matches!(g.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn failed_cells_are_listed() {
        let g = ExperimentGrid { workload: WorkloadSpec { n: 10, ..tiny_grid().workload }, ..tiny_grid() };
        let out = sweep(&ExperimentGrid { k: vec![3], ..g }, Some(1));
        // n too small for the workload: every cell fails during generation.
        let out = out.unwrap();
        assert!(out.rows.is_empty());
        assert!(matches!(out.check(), Err(Error::PartialFailure { failed: 1, .. })));
    }

    #[test]
    fn no_attack_means_no_recovery() {
        let w = generate(&WorkloadSpec { m: 80, n: 800, group_size: 10, attack_intensity: 0.0, ..WorkloadSpec::default() }).unwrap();
        let sim = run(&w, None, &SimConfig { k: 4, ..SimConfig::default() }).unwrap();
        let r = SimReport::from_trace(sim.trace()).unwrap();
        assert_eq!(r.affected_count, 0);
        assert_eq!(r.mean_recovery_ticks, None);
        assert_eq!(r.commits, 80);
        assert!(sim.recovery_reports().is_empty());
        assert!(!sim.trace().iter().any(|e| e.kind == EventKind::ResponseDone));
    }

    #[test]
    fn toml_config_sections() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "[workload]\nm = 40\nn = 400\n\n[sim]\ndelta = 3\nstrategy = \"oneib\"\n").unwrap();
        let cfg: RunConfig = load_config(&p).unwrap();
        assert_eq!((cfg.workload.m, cfg.sim.delta, cfg.sim.strategy), (40, 3, SimStrategy::OneIb));
        std::fs::write(&p, "[sim]\nbogus = 1\n").unwrap();
        assert!(matches!(load_config::<RunConfig>(&p), Err(Error::Config(_))));
    }
}
