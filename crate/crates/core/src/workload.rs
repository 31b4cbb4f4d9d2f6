//! Banking money-transfer workload generator.
//!
//! Transactions are split into consecutive dependency groups. Inside a group
//! every ordered pair `(i, j)` with `i` arriving first draws a uniform `p`;
//! the pair becomes a planned dependency `i -> j` when `p > beta`, subject to
//! the out-degree cap `tx_max` and to `j` having room in its tuple budget.
//! A transaction with dependents owns one hub tuple that it shares with all
//! of them, so every planned pair shares exactly that tuple.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{shared_tuples, PrecedenceGraph, TransactionSpec, TupleId, TxnId, TxnKind, BASIS_POINTS};

/// Range of the malicious tamper delta, in cents.
pub const TAMPER_RANGE: (i64, i64) = (1_000, 100_000);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkloadSpec {
    pub m: usize,
    pub n: usize,
    pub beta: f64,
    pub tx_max: usize,
    pub size_max: usize,
    pub group_size: usize,
    pub gamma_range: [f64; 2],
    pub seed: u64,
    pub attack_intensity: f64,
    pub initial_balance: i64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            m: 5000,
            n: 100_000,
            beta: 0.75,
            tx_max: 3,
            size_max: 6,
            group_size: 50,
            gamma_range: [0.01, 0.1],
            seed: 0,
            attack_intensity: 0.0,
            initial_balance: 1_000_000,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.size_max < 2 {
            return bad(format!("size_max must be >= 2, got {}", self.size_max));
        }
        if self.m > 0 && (self.group_size == 0 || self.group_size > self.m) {
            return bad(format!("group_size must be in 1..={}, got {}", self.m, self.group_size));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad(format!("beta must be in [0, 1], got {}", self.beta));
        }
        if !(0.0..1.0).contains(&self.attack_intensity) {
            return bad(format!("attack intensity must be in [0, 1), got {}", self.attack_intensity));
        }
        let [lo, hi] = self.gamma_range;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return bad(format!("gamma range [{lo}, {hi}] must satisfy 0 < lo <= hi <= 1"));
        }
        Ok(())
    }

    pub fn malicious_count(&self) -> usize {
        (self.attack_intensity * self.m as f64).floor() as usize
    }
}

/// Candidate-edge counts for one dependency group, before any capping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupStats {
    pub pairs: u64,
    pub candidates: u64,
}

impl GroupStats {
    pub fn probability(&self) -> f64 {
        if self.pairs == 0 {
            0.0
        } else {
            self.candidates as f64 / self.pairs as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub spec: WorkloadSpec,
    /// Transactions in arrival order; `txns[i].id == TxnId(i)`.
    pub txns: Vec<TransactionSpec>,
    pub planned_pg: PrecedenceGraph,
    pub malicious_ids: BTreeSet<TxnId>,
    pub group_stats: Vec<GroupStats>,
}

pub fn generate(spec: &WorkloadSpec) -> Result<Workload> {
    spec.validate()?;
    let m = spec.m;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let malicious = malicious_positions(spec, &mut rng);
    let sizes: Vec<usize> = (0..m).map(|_| rng.random_range(2..=spec.size_max)).collect();

    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut out_degree = vec![0usize; m];
    let mut group_stats = Vec::new();
    let mut edges = BTreeSet::new();
    let slots = |i: usize, parents: &[Vec<usize>], out_degree: &[usize]| {
        parents[i].len() + usize::from(out_degree[i] > 0)
    };

    for start in (0..m).step_by(spec.group_size.max(1)) {
        let end = (start + spec.group_size).min(m);
        let mut stats = GroupStats { pairs: 0, candidates: 0 };
        for i in start..end {
            for j in i + 1..end {
                let p: f64 = rng.random();
                stats.pairs += 1;
                if p <= spec.beta {
                    continue;
                }
                stats.candidates += 1;
                let room_i = out_degree[i] > 0 || slots(i, &parents, &out_degree) < sizes[i];
                let room_j = slots(j, &parents, &out_degree) < sizes[j];
                let common_parent = parents[i].iter().any(|p| parents[j].contains(p));
                if out_degree[i] >= spec.tx_max || malicious[j] || !room_i || !room_j || common_parent {
                    continue;
                }
                out_degree[i] += 1;
                parents[j].push(i);
                edges.insert((TxnId(i as u32), TxnId(j as u32)));
            }
        }
        group_stats.push(stats);
    }

    // tuple allocation: hubs first-come, then fresh tuples up to the drawn size
    let mut next = 0u32;
    let mut hub = vec![None; m];
    let mut txns = Vec::with_capacity(m);
    let [glo, ghi] = spec.gamma_range;
    let (glo, ghi) = (
        (glo * BASIS_POINTS as f64).round() as u32,
        (ghi * BASIS_POINTS as f64).round() as u32,
    );
    for i in 0..m {
        let mut tuples: Vec<TupleId> = parents[i].iter().map(|&p| hub[p].expect("parent precedes child")).collect();
        if out_degree[i] > 0 {
            hub[i] = Some(TupleId(next));
            tuples.push(TupleId(next));
            next += 1;
        }
        while tuples.len() < sizes[i] {
            tuples.push(TupleId(next));
            next += 1;
        }
        tuples.shuffle(&mut rng);
        let id = TxnId(i as u32);
        let txn = if malicious[i] {
            TransactionSpec::malicious(id, tuples, rng.random_range(TAMPER_RANGE.0..=TAMPER_RANGE.1))
        } else {
            let kind = [TxnKind::Distribute, TxnKind::Collect, TxnKind::ManyToMany][rng.random_range(0..3)];
            TransactionSpec::transfer(id, kind, tuples, rng.random_range(glo..=ghi))
        };
        txns.push(txn);
    }
    if next as usize > spec.n {
        return Err(Error::InsufficientTuples { needed: next as usize, n: spec.n });
    }

    let planned_pg = PrecedenceGraph { nodes: (0..m as u32).map(TxnId).collect(), edges };
    let malicious_ids = (0..m).filter(|&i| malicious[i]).map(|i| TxnId(i as u32)).collect();
    Ok(Workload { spec: spec.clone(), txns, planned_pg, malicious_ids, group_stats })
}

/// Uniformly spaced arrival slots with seeded jitter of at most half a group.
fn malicious_positions(spec: &WorkloadSpec, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let m = spec.m;
    let mut taken = vec![false; m];
    let count = spec.malicious_count();
    if count == 0 {
        return taken;
    }
    let spacing = m as f64 / count as f64;
    let half = (spec.group_size / 2) as i64;
    for i in 0..count {
        let base = ((i as f64 + 0.5) * spacing) as i64;
        let jitter = rng.random_range(-half..=half);
        let mut pos = (base + jitter).clamp(0, m as i64 - 1) as usize;
        while taken[pos] {
            pos = (pos + 1) % m;
        }
        taken[pos] = true;
    }
    taken
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleSummary {
    pub edges: usize,
    pub shared_tuples: usize,
    pub mean_size: f64,
}

pub fn scale_summary(workload: &Workload) -> ScaleSummary {
    let total: usize = workload.txns.iter().map(|t| t.tuples().len()).sum();
    ScaleSummary {
        edges: workload.planned_pg.edges.len(),
        shared_tuples: shared_tuples(&workload.txns).len(),
        mean_size: if workload.txns.is_empty() { 0.0 } else { total as f64 / workload.txns.len() as f64 },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxnRecord {
    pub id: TxnId,
    pub kind: TxnKind,
    pub reads: Vec<TupleId>,
    pub writes: Vec<TupleId>,
    pub gamma: f64,
    pub malicious: bool,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub amount: i64,
}

fn is_zero(x: &i64) -> bool {
    *x == 0
}

/// On-disk workload: `{spec, txns, planned_edges}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadFile {
    pub spec: WorkloadSpec,
    pub txns: Vec<TxnRecord>,
    pub planned_edges: Vec<[TxnId; 2]>,
}

impl From<&Workload> for WorkloadFile {
    fn from(w: &Workload) -> Self {
        WorkloadFile {
            spec: w.spec.clone(),
            txns: w
                .txns
                .iter()
                .map(|t| TxnRecord {
                    id: t.id,
                    kind: t.kind,
                    reads: t.reads.clone(),
                    writes: t.writes.clone(),
                    gamma: t.gamma_bp as f64 / BASIS_POINTS as f64,
                    malicious: t.is_malicious(),
                    amount: t.amount,
                })
                .collect(),
            planned_edges: w.planned_pg.edges.iter().map(|&(a, b)| [a, b]).collect(),
        }
    }
}

impl WorkloadFile {
    pub fn into_workload(self) -> Result<Workload> {
        let n = self.spec.n;
        let txns: Vec<TransactionSpec> = self
            .txns
            .into_iter()
            .map(|r| TransactionSpec {
                id: r.id,
                kind: r.kind,
                reads: r.reads,
                writes: r.writes,
                gamma_bp: (r.gamma * BASIS_POINTS as f64).round() as u32,
                amount: r.amount,
            })
            .collect();
        for (i, t) in txns.iter().enumerate() {
            if t.id.index() != i {
                return Err(Error::Parse(format!("transaction {} out of arrival order at {i}", t.id)));
            }
            t.check(n)?;
        }
        let malicious_ids = txns.iter().filter(|t| t.is_malicious()).map(|t| t.id).collect();
        let planned_pg = PrecedenceGraph {
            nodes: txns.iter().map(|t| t.id).collect(),
            edges: self.planned_edges.into_iter().map(|[a, b]| (a, b)).collect(),
        };
        Ok(Workload { spec: self.spec, txns, planned_pg, malicious_ids, group_stats: Vec::new() })
    }

    pub fn load(path: &Path) -> Result<Workload> {
        let file: WorkloadFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        file.into_workload()
    }

    pub fn save(workload: &Workload, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(&WorkloadFile::from(workload))?)?;
        Ok(())
    }
}
