use std::collections::BTreeMap;

use super::{pairwise_spread, IBAssignment};
use crate::error::{Error, Result};
use crate::model::{TransactionSpec, TupleId};

/// Largest number of transaction placements the exact solver will enumerate.
pub const EXACT_BUDGET: u64 = 1_000_000;

/// Exhaustive minimiser of `f1_weighted + f2` for tiny instances.
pub fn exact_solve(workload: &[TransactionSpec], n: usize, k: usize) -> Result<IBAssignment> {
    exact_solve_weighted(workload, n, k, 1.0)
}

/// Enumerates every transaction-to-IB map in lexicographic order, drops maps
/// that leave an IB empty, and keeps the first minimiser of
/// `f1_weighted + f2_weight * f2` where `f2` is the pairwise spread of IB
/// tuple counts.
pub fn exact_solve_weighted(workload: &[TransactionSpec], n: usize, k: usize, f2_weight: f64) -> Result<IBAssignment> {
    let m = workload.len();
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if m < k {
        return Err(Error::TooFewTransactions { m, k });
    }
    let total = (k as u64).checked_pow(m as u32).filter(|&t| t <= EXACT_BUDGET);
    let Some(total) = total else {
        return Err(Error::BudgetExceeded { m, k, budget: EXACT_BUDGET });
    };

    // compact tuple index over the accessed tuples only
    let mut compact: BTreeMap<TupleId, usize> = BTreeMap::new();
    let txn_tuples: Vec<Vec<usize>> = workload
        .iter()
        .map(|t| {
            t.tuples()
                .into_iter()
                .map(|o| {
                    let next = compact.len();
                    *compact.entry(o).or_insert(next)
                })
                .collect()
        })
        .collect();

    let mut placement = vec![0usize; m];
    let mut masks = vec![0u64; compact.len()];
    let mut sizes = vec![0usize; k];
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..total {
        masks.iter_mut().for_each(|x| *x = 0);
        for (pos, tuples) in txn_tuples.iter().enumerate() {
            for &c in tuples {
                masks[c] |= 1 << placement[pos];
            }
        }
        sizes.iter_mut().for_each(|x| *x = 0);
        let mut f1 = 0u64;
        for &mask in &masks {
            let deg = mask.count_ones() as u64;
            f1 += deg.saturating_sub(1);
            for (ib, size) in sizes.iter_mut().enumerate() {
                *size += ((mask >> ib) & 1) as usize;
            }
        }
        if sizes.iter().all(|&s| s > 0) {
            let obj = f1 as f64 + f2_weight * pairwise_spread(&sizes);
            if best.as_ref().is_none_or(|(b, _)| obj < *b - 1e-9) {
                best = Some((obj, placement.clone()));
            }
        }
        // next map, last transaction least significant
        for slot in placement.iter_mut().rev() {
            *slot += 1;
            if *slot < k {
                break;
            }
            *slot = 0;
        }
    }
    let (_, txn_ib) = best.ok_or_else(|| Error::Config("no feasible assignment".into()))?;
    Ok(IBAssignment::from_placement(
        workload,
        n,
        k,
        txn_ib.into_iter().map(|ib| ib as u32).collect(),
    ))
}
