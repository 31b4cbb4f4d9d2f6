//! Intrusion boundary assignment: constraints, quality metrics and solvers.
//!
//! An assignment places every transaction in exactly one IB and derives the
//! tuple side from it: a tuple belongs to every IB that hosts a transaction
//! touching it, and a tuple in two or more IBs is a boundary tuple.

mod exact;
mod heuristics;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{TransactionSpec, TupleId, TxnId};

pub use exact::{exact_solve, exact_solve_weighted, EXACT_BUDGET};
pub use heuristics::{ba_assign, bfa_assign, internal_tuple_counts, ra_assign, sa_assign};

/// Transaction and tuple placement over `k` intrusion boundaries.
///
/// Transactions are indexed by their position in the workload slice the
/// assignment was built from; tuples by [`TupleId::index`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IBAssignment {
    pub k: usize,
    /// Sorted IB indices per tuple.
    pub tuple_ibs: Vec<Vec<u32>>,
    pub txn_ib: Vec<u32>,
    pub boundary: Vec<bool>,
    /// Positions of the transactions accessing each tuple.
    pub access: Vec<Vec<u32>>,
}

impl IBAssignment {
    /// Derives the tuple side of an assignment from a transaction placement.
    pub fn from_placement(workload: &[TransactionSpec], n: usize, k: usize, txn_ib: Vec<u32>) -> Self {
        let mut tuple_ibs = vec![Vec::new(); n];
        let access = access_matrix(workload, n);
        for (pos, txn) in workload.iter().enumerate() {
            let ib = txn_ib[pos];
            for o in txn.tuples() {
                let ibs: &mut Vec<u32> = &mut tuple_ibs[o.index()];
                if let Err(at) = ibs.binary_search(&ib) {
                    ibs.insert(at, ib);
                }
            }
        }
        let boundary = tuple_ibs.iter().map(|s| s.len() >= 2).collect();
        IBAssignment { k, tuple_ibs, txn_ib, boundary, access }
    }

    pub fn n(&self) -> usize {
        self.tuple_ibs.len()
    }

    /// IBs spanned by a set of tuples.
    pub fn ibs_of<'a>(&self, tuples: impl IntoIterator<Item = &'a TupleId>) -> BTreeSet<u32> {
        tuples
            .into_iter()
            .flat_map(|o| self.tuple_ibs[o.index()].iter().copied())
            .collect()
    }

    pub fn is_boundary(&self, o: TupleId) -> bool {
        self.boundary[o.index()]
    }

    pub fn boundary_tuples(&self) -> BTreeSet<TupleId> {
        self.boundary
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| TupleId(i as u32))
            .collect()
    }

    pub fn ib_txn_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.k];
        for &ib in &self.txn_ib {
            if let Some(slot) = c.get_mut(ib as usize) {
                *slot += 1;
            }
        }
        c
    }

    pub fn ib_tuple_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.k];
        for ibs in &self.tuple_ibs {
            for &ib in ibs {
                if let Some(slot) = c.get_mut(ib as usize) {
                    *slot += 1;
                }
            }
        }
        c
    }

    pub fn to_file(&self) -> AssignmentFile {
        AssignmentFile {
            k: self.k,
            txn_ib: self.txn_ib.clone(),
            tuple_ibs: self.tuple_ibs.clone(),
            boundary: self.boundary.clone(),
        }
    }

    /// Rebuilds an assignment from its file form; `access` is recomputed from the workload.
    pub fn from_file(file: AssignmentFile, workload: &[TransactionSpec]) -> Result<Self> {
        let n = file.tuple_ibs.len();
        if file.boundary.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} boundary flags for {n} tuples",
                file.boundary.len()
            )));
        }
        if let Some(t) = workload.iter().flat_map(|t| t.tuples()).find(|o| o.index() >= n) {
            return Err(Error::TupleOutOfRange { tuple: t, n });
        }
        Ok(IBAssignment {
            k: file.k,
            tuple_ibs: file.tuple_ibs,
            txn_ib: file.txn_ib,
            boundary: file.boundary,
            access: access_matrix(workload, n),
        })
    }
}

fn access_matrix(workload: &[TransactionSpec], n: usize) -> Vec<Vec<u32>> {
    let mut access = vec![Vec::new(); n];
    for (pos, txn) in workload.iter().enumerate() {
        for o in txn.tuples() {
            access[o.index()].push(pos as u32);
        }
    }
    access
}

/// On-disk assignment: `{k, txn_ib, tuple_ibs, boundary}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentFile {
    pub k: usize,
    pub txn_ib: Vec<u32>,
    pub tuple_ibs: Vec<Vec<u32>>,
    pub boundary: Vec<bool>,
}

impl AssignmentFile {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }
}

/// The six constraint families of the boundary demarcation program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Constraint {
    /// A tuple in two or more IBs must be flagged boundary.
    C1,
    /// A flagged tuple must be in two or more IBs.
    C2,
    /// Every tuple of a transaction belongs to the transaction's IB.
    C3,
    /// Every transaction is assigned to exactly one valid IB.
    C4,
    /// Every IB holds at least one tuple.
    C5,
    /// Matrix entries are well formed (IB indices in range, no duplicates).
    C6,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ConstraintViolation {
    pub constraint: Constraint,
    /// Tuple index for C1, C2, C3 (the missing tuple) and C6; transaction
    /// position for C4; IB index for C5.
    pub index: usize,
    pub ib: Option<u32>,
    pub txn: Option<TxnId>,
}

impl fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at index {}", self.constraint, self.index)?;
        if let Some(ib) = self.ib {
            write!(f, " (IB {ib})")?;
        }
        if let Some(t) = self.txn {
            write!(f, " (txn {t})")?;
        }
        Ok(())
    }
}

pub fn validate(a: &IBAssignment, workload: &[TransactionSpec]) -> Result<Vec<ConstraintViolation>> {
    let n = a.n();
    if a.txn_ib.len() != workload.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} transaction placements for {} transactions",
            a.txn_ib.len(),
            workload.len()
        )));
    }
    if a.boundary.len() != n {
        return Err(Error::DimensionMismatch(format!("{} boundary flags for {n} tuples", a.boundary.len())));
    }
    if let Some(o) = workload.iter().flat_map(|t| t.tuples()).find(|o| o.index() >= n) {
        return Err(Error::DimensionMismatch(format!("tuple {o} outside database of {n}")));
    }

    let mut out = Vec::new();
    let k = a.k as u32;
    for (i, ibs) in a.tuple_ibs.iter().enumerate() {
        let well_formed = ibs.windows(2).all(|w| w[0] < w[1]) && ibs.iter().all(|&ib| ib < k);
        if !well_formed {
            out.push(ConstraintViolation { constraint: Constraint::C6, index: i, ib: None, txn: None });
        }
        let shared = ibs.len() >= 2;
        if shared && !a.boundary[i] {
            out.push(ConstraintViolation { constraint: Constraint::C1, index: i, ib: None, txn: None });
        }
        if !shared && a.boundary[i] {
            out.push(ConstraintViolation { constraint: Constraint::C2, index: i, ib: None, txn: None });
        }
    }
    for (pos, txn) in workload.iter().enumerate() {
        let ib = a.txn_ib[pos];
        if ib >= k {
            out.push(ConstraintViolation { constraint: Constraint::C4, index: pos, ib: Some(ib), txn: Some(txn.id) });
            continue;
        }
        for o in txn.tuples() {
            if !a.tuple_ibs[o.index()].contains(&ib) {
                out.push(ConstraintViolation {
                    constraint: Constraint::C3,
                    index: o.index(),
                    ib: Some(ib),
                    txn: Some(txn.id),
                });
            }
        }
    }
    for (ib, &size) in a.ib_tuple_counts().iter().enumerate() {
        if size == 0 {
            out.push(ConstraintViolation { constraint: Constraint::C5, index: ib, ib: Some(ib as u32), txn: None });
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionQuality {
    /// Number of boundary tuples.
    pub f1_simple: u64,
    /// Boundary tuples weighted by degree of sharing minus one.
    pub f1_weighted: u64,
    /// Pairwise IB size spread over tuple counts.
    pub f2_imbalance: f64,
    /// Same spread over transaction counts.
    pub f2_txn_imbalance: f64,
    /// Jain index over per-IB transaction counts.
    pub fairness: f64,
    pub boundary_tuples: BTreeSet<TupleId>,
    pub ib_txn_counts: Vec<usize>,
    pub ib_tuple_counts: Vec<usize>,
}

impl PartitionQuality {
    /// `f1_weighted + weight * f2_imbalance`.
    pub fn objective(&self, f2_weight: f64) -> f64 {
        self.f1_weighted as f64 + f2_weight * self.f2_imbalance
    }
}

pub fn quality(a: &IBAssignment, workload: &[TransactionSpec]) -> Result<PartitionQuality> {
    let violations = validate(a, workload)?;
    if let Some(first) = violations.first() {
        return Err(Error::InvalidAssignment { count: violations.len(), first: first.to_string() });
    }
    Ok(quality_unchecked(a))
}

pub(crate) fn quality_unchecked(a: &IBAssignment) -> PartitionQuality {
    let f1_simple = a.boundary.iter().filter(|&&b| b).count() as u64;
    let f1_weighted = a
        .tuple_ibs
        .iter()
        .zip(&a.boundary)
        .filter(|(_, &b)| b)
        .map(|(ibs, _)| ibs.len() as u64 - 1)
        .sum();
    let ib_txn_counts = a.ib_txn_counts();
    let ib_tuple_counts = a.ib_tuple_counts();
    PartitionQuality {
        f1_simple,
        f1_weighted,
        f2_imbalance: pairwise_spread(&ib_tuple_counts),
        f2_txn_imbalance: pairwise_spread(&ib_txn_counts),
        fairness: jain_index(&ib_txn_counts),
        boundary_tuples: a.boundary_tuples(),
        ib_txn_counts,
        ib_tuple_counts,
    }
}

/// `sqrt(sum_{i<j} (s_i - s_j)^2)`.
pub fn pairwise_spread(sizes: &[usize]) -> f64 {
    let mut acc = 0.0;
    for (i, &a) in sizes.iter().enumerate() {
        for &b in &sizes[i + 1..] {
            let d = a as f64 - b as f64;
            acc += d * d;
        }
    }
    acc.sqrt()
}

/// `(sum x)^2 / (k * sum x^2)`; 1.0 for an all-zero input.
pub fn jain_index(xs: &[usize]) -> f64 {
    let sum: f64 = xs.iter().map(|&x| x as f64).sum();
    let sq: f64 = xs.iter().map(|&x| (x as f64) * (x as f64)).sum();
    if sq == 0.0 {
        return 1.0;
    }
    sum * sum / (xs.len() as f64 * sq)
}

/// Partitioning strategies exposed to the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Bfa,
    Ba,
    Ra,
    Sa,
    Exact,
}

impl Strategy {
    pub fn assign(self, workload: &[TransactionSpec], n: usize, k: usize, seed: u64) -> Result<IBAssignment> {
        match self {
            Strategy::Bfa => bfa_assign(workload, n, k, seed),
            Strategy::Ba => ba_assign(workload, n, k, seed),
            Strategy::Ra => ra_assign(workload, n, k, seed),
            Strategy::Sa => sa_assign(workload, n, k, seed),
            Strategy::Exact => exact_solve(workload, n, k),
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bfa" => Ok(Strategy::Bfa),
            "ba" => Ok(Strategy::Ba),
            "ra" => Ok(Strategy::Ra),
            "sa" => Ok(Strategy::Sa),
            "exact" => Ok(Strategy::Exact),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TxnKind;

    pub(crate) fn txn(id: u32, tuples: &[u32]) -> TransactionSpec {
        TransactionSpec::transfer(
            TxnId(id),
            TxnKind::Distribute,
            tuples.iter().map(|&o| TupleId(o)).collect(),
            500,
        )
    }

    #[test]
    fn single_ib_is_clean() {
        let w = vec![txn(0, &[0, 1]), txn(1, &[1, 2]), txn(2, &[3, 4])];
        let a = IBAssignment::from_placement(&w, 5, 1, vec![0, 0, 0]);
        assert!(validate(&a, &w).unwrap().is_empty());
        assert!(a.boundary.iter().all(|&b| !b));
        let q = quality(&a, &w).unwrap();
        assert_eq!(q.f1_weighted, 0);
        assert_eq!(q.fairness, 1.0);
    }

    #[test]
    fn containment_violation_is_reported() {
        let w = vec![txn(0, &[1, 2]), txn(1, &[2, 3])];
        let mut a = IBAssignment::from_placement(&w, 4, 2, vec![0, 1]);
        // o2 only in IB 1 now
        a.tuple_ibs[2] = vec![1];
        a.boundary[2] = false;
        let v = validate(&a, &w).unwrap();
        assert_eq!(
            v,
            vec![ConstraintViolation { constraint: Constraint::C3, index: 2, ib: Some(0), txn: Some(TxnId(0)) }]
        );
        assert!(matches!(quality(&a, &w), Err(Error::InvalidAssignment { .. })));
    }

    #[test]
    fn flags_and_empty_ibs() {
        let w = vec![txn(0, &[0, 1]), txn(1, &[1, 2])];
        let mut a = IBAssignment::from_placement(&w, 3, 3, vec![0, 1]);
        a.boundary[0] = true;
        a.boundary[1] = false;
        let kinds: Vec<_> = validate(&a, &w).unwrap().into_iter().map(|v| v.constraint).collect();
        assert_eq!(kinds, vec![Constraint::C1, Constraint::C2, Constraint::C5]);
    }

    #[test]
    fn dimension_mismatch() {
        let w = vec![txn(0, &[0, 1])];
        let a = IBAssignment::from_placement(&w, 2, 1, vec![0]);
        assert!(matches!(validate(&a, &[]), Err(Error::DimensionMismatch(_))));
        let big = vec![txn(0, &[0, 7])];
        assert!(matches!(validate(&a, &big), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn weighted_boundary_counts_degree() {
        let w = vec![txn(0, &[0, 1]), txn(1, &[1, 2]), txn(2, &[1, 3])];
        let two = IBAssignment::from_placement(&w, 4, 2, vec![0, 1, 1]);
        let q = quality(&two, &w).unwrap();
        assert_eq!((q.f1_simple, q.f1_weighted), (1, 1));
        let three = IBAssignment::from_placement(&w, 4, 3, vec![0, 1, 2]);
        let q = quality(&three, &w).unwrap();
        assert_eq!((q.f1_simple, q.f1_weighted), (1, 2));
    }

    #[test]
    fn jain_of_eight_two() {
        assert!((jain_index(&[8, 2]) - 100.0 / 136.0).abs() < 1e-12);
        assert_eq!(jain_index(&[3, 3, 3]), 1.0);
    }

    #[test]
    fn spread_matches_pairwise_definition() {
        // (5-3)^2 + (5-1)^2 + (3-1)^2 = 24
        assert!((pairwise_spread(&[5, 3, 1]) - 24f64.sqrt()).abs() < 1e-12);
        assert_eq!(pairwise_spread(&[4]), 0.0);
    }

    #[test]
    fn file_roundtrip() {
        let w = vec![txn(0, &[0, 1]), txn(1, &[1, 2])];
        let a = IBAssignment::from_placement(&w, 3, 2, vec![0, 1]);
        let json = serde_json::to_string(&a.to_file()).unwrap();
        let back: AssignmentFile = serde_json::from_str(&json).unwrap();
        assert_eq!(IBAssignment::from_file(back, &w).unwrap(), a);
    }
}
