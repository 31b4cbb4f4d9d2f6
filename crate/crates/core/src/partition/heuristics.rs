use std::cmp::Reverse;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::IBAssignment;
use crate::error::{Error, Result};
use crate::model::{TransactionSpec, TupleId};

/// Share of transactions the skewed assignment sends to its hot IBs.
const SKEW_HOT_SHARE: f64 = 0.8;
/// Share of IBs that are hot under the skewed assignment.
const SKEW_HOT_IBS: f64 = 0.2;

fn check_dims(workload: &[TransactionSpec], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if workload.len() < k {
        return Err(Error::TooFewTransactions { m: workload.len(), k });
    }
    Ok(())
}

/// Per transaction, the number of its tuples no other transaction touches.
pub fn internal_tuple_counts(workload: &[TransactionSpec], n: usize) -> Vec<usize> {
    let mut users = vec![0u32; n];
    for t in workload {
        for o in t.tuples() {
            users[o.index()] += 1;
        }
    }
    workload
        .iter()
        .map(|t| t.tuples().iter().filter(|o| users[o.index()] == 1).count())
        .collect()
}

/// How a greedy pass picks among IBs that already share tuples with a transaction.
#[derive(Clone, Copy)]
enum Fit {
    /// Most shared tuples, then smaller IB, then lower index.
    Best,
    /// Smallest overlapping IB, then lower index.
    Balanced,
}

struct Placement {
    txn_ib: Vec<u32>,
    sizes: Vec<usize>,
    /// IBs currently holding each tuple.
    members: Vec<Vec<u32>>,
}

impl Placement {
    fn new(m: usize, n: usize, k: usize) -> Self {
        Placement { txn_ib: vec![u32::MAX; m], sizes: vec![0; k], members: vec![Vec::new(); n] }
    }

    fn place(&mut self, pos: usize, tuples: &[TupleId], ib: usize) {
        self.txn_ib[pos] = ib as u32;
        self.sizes[ib] += 1;
        for o in tuples {
            let m = &mut self.members[o.index()];
            if !m.contains(&(ib as u32)) {
                m.push(ib as u32);
            }
        }
    }

    fn smallest(&self, candidates: impl Iterator<Item = usize>) -> Option<usize> {
        candidates.min_by_key(|&ib| (self.sizes[ib], ib))
    }
}

fn greedy(workload: &[TransactionSpec], n: usize, k: usize, fit: Fit) -> Result<IBAssignment> {
    check_dims(workload, k)?;
    let internal = internal_tuple_counts(workload, n);
    let mut order: Vec<usize> = (0..workload.len()).collect();
    order.sort_by_key(|&p| (Reverse(internal[p]), p));

    let tuples: Vec<Vec<TupleId>> = workload.iter().map(|t| t.tuples().into_iter().collect()).collect();
    let mut p = Placement::new(workload.len(), n, k);
    for (ib, &pos) in order[..k].iter().enumerate() {
        p.place(pos, &tuples[pos], ib);
    }

    let mut shared = vec![0usize; k];
    let mut overlapping: Vec<usize> = Vec::with_capacity(k);
    for &pos in &order[k..] {
        overlapping.clear();
        for o in &tuples[pos] {
            for &ib in &p.members[o.index()] {
                let ib = ib as usize;
                if shared[ib] == 0 {
                    overlapping.push(ib);
                }
                shared[ib] += 1;
            }
        }
        let ib = if overlapping.is_empty() {
            p.smallest(0..k).expect("k >= 1")
        } else {
            match fit {
                Fit::Best => *overlapping
                    .iter()
                    .min_by_key(|&&ib| (Reverse(shared[ib]), p.sizes[ib], ib))
                    .expect("non-empty"),
                Fit::Balanced => p.smallest(overlapping.iter().copied()).expect("non-empty"),
            }
        };
        for &ib in &overlapping {
            shared[ib] = 0;
        }
        p.place(pos, &tuples[pos], ib);
    }
    Ok(IBAssignment::from_placement(workload, n, k, p.txn_ib))
}

/// Best-fit assignment.
///
/// Transactions are visited in descending order of internal (unshared)
/// tuples. The first `k` seed one IB each; every later transaction joins the
/// IB sharing the most tuples with it, or the smallest IB if none overlaps.
/// Deterministic; `seed` is accepted for interface symmetry.
pub fn bfa_assign(workload: &[TransactionSpec], n: usize, k: usize, _seed: u64) -> Result<IBAssignment> {
    greedy(workload, n, k, Fit::Best)
}

/// Balanced assignment: same visiting order and seeding as best-fit, but a
/// transaction joins the smallest overlapping IB (smallest overall if none).
pub fn ba_assign(workload: &[TransactionSpec], n: usize, k: usize, _seed: u64) -> Result<IBAssignment> {
    greedy(workload, n, k, Fit::Balanced)
}

/// Random assignment. One transaction from a seeded shuffle is pinned to
/// each IB so no IB is empty; the rest go to uniformly random IBs.
pub fn ra_assign(workload: &[TransactionSpec], n: usize, k: usize, seed: u64) -> Result<IBAssignment> {
    check_dims(workload, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..workload.len()).collect();
    order.shuffle(&mut rng);
    let mut txn_ib = vec![0u32; workload.len()];
    for (i, &pos) in order.iter().enumerate() {
        txn_ib[pos] = if i < k { i as u32 } else { rng.random_range(0..k) as u32 };
    }
    Ok(IBAssignment::from_placement(workload, n, k, txn_ib))
}

/// Skewed 80/20 assignment over `ceil(0.2 k)` hot IBs, with one pinned
/// transaction per IB as in [`ra_assign`].
pub fn sa_assign(workload: &[TransactionSpec], n: usize, k: usize, seed: u64) -> Result<IBAssignment> {
    if k < 5 {
        return Err(Error::TooFewIbs(k));
    }
    check_dims(workload, k)?;
    let hot = (SKEW_HOT_IBS * k as f64).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..workload.len()).collect();
    order.shuffle(&mut rng);
    let mut txn_ib = vec![0u32; workload.len()];
    for (i, &pos) in order.iter().enumerate() {
        let ib = if i < k {
            i
        } else if rng.random_bool(SKEW_HOT_SHARE) {
            rng.random_range(0..hot)
        } else {
            rng.random_range(hot..k)
        };
        txn_ib[pos] = ib as u32;
    }
    Ok(IBAssignment::from_placement(workload, n, k, txn_ib))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{TxnId, TxnKind};
    use crate::partition::{quality, validate};

    fn txn(id: u32, tuples: &[u32]) -> TransactionSpec {
        TransactionSpec::transfer(
            TxnId(id),
            TxnKind::Collect,
            tuples.iter().map(|&o| TupleId(o)).collect(),
            500,
        )
    }

    fn independent(m: u32) -> Vec<TransactionSpec> {
        (0..m).map(|i| txn(i, &[2 * i, 2 * i + 1])).collect()
    }

    #[test]
    fn bfa_worked_example() {
        // A={o1,o2}, B={o2,o3}, C={o4,o5}
        let w = vec![txn(0, &[1, 2]), txn(1, &[2, 3]), txn(2, &[4, 5])];
        assert_eq!(internal_tuple_counts(&w, 6), vec![1, 1, 2]);
        let a = bfa_assign(&w, 6, 2, 0).unwrap();
        assert_eq!(a.txn_ib, vec![1, 1, 0]);
        assert!(validate(&a, &w).unwrap().is_empty());
        let q = quality(&a, &w).unwrap();
        assert!(q.boundary_tuples.is_empty());
        assert_eq!(q.f1_weighted, 0);
    }

    #[test]
    fn k_one_collapses_everything() {
        let w = vec![txn(0, &[1, 2]), txn(1, &[2, 3]), txn(2, &[4, 5])];
        let bfa = bfa_assign(&w, 6, 1, 0).unwrap();
        assert!(bfa.txn_ib.iter().all(|&ib| ib == 0));
        assert!(bfa.boundary_tuples().is_empty());
        assert_eq!(ra_assign(&w, 6, 1, 99).unwrap(), bfa);
    }

    #[test]
    fn ba_round_robins_independent_txns() {
        let w = independent(9);
        let a = ba_assign(&w, 18, 3, 0).unwrap();
        assert_eq!(a.ib_txn_counts(), vec![3, 3, 3]);
        let w4 = independent(4);
        let a = ba_assign(&w4, 8, 2, 0).unwrap();
        assert_eq!(quality(&a, &w4).unwrap().fairness, 1.0);
    }

    #[test]
    fn best_fit_and_balanced_diverge_on_overlap() {
        // internal counts: t0 0, t1 1 (o3), t2 1 (o4), t3 1 (o5)
        // visit order t1, t2, t3, t0; seeds t1 -> IB0, t2 -> IB1; t3 joins IB0 via o2
        // t0 shares {o1, o2} with IB0 (size 2) and {o0} with IB1 (size 1)
        let w = vec![txn(0, &[0, 1, 2]), txn(1, &[2, 3]), txn(2, &[0, 4]), txn(3, &[1, 2, 5])];
        let b = bfa_assign(&w, 6, 2, 0).unwrap();
        assert_eq!(b.txn_ib, vec![0, 0, 1, 0]);
        let a = ba_assign(&w, 6, 2, 0).unwrap();
        assert_eq!(a.txn_ib, vec![1, 0, 1, 0]);
    }

    #[test]
    fn errors() {
        let w = independent(3);
        assert_eq!(bfa_assign(&w, 6, 4, 0), Err(Error::TooFewTransactions { m: 3, k: 4 }));
        assert_eq!(sa_assign(&w, 6, 3, 0), Err(Error::TooFewIbs(3)));
        assert!(ra_assign(&w, 6, 0, 0).is_err());
    }

    #[test]
    fn sa_hot_share_is_concentrated() {
        let w = independent(1000);
        for seed in 0..20 {
            let a = sa_assign(&w, 2000, 10, seed).unwrap();
            let c = a.ib_txn_counts();
            let hot = (c[0] + c[1]) as f64 / 1000.0;
            assert!((0.75..=0.85).contains(&hot), "seed {seed}: {hot}");
            assert!(c.iter().all(|&x| x > 0));
        }
    }

    #[test]
    fn strategies_are_deterministic() {
        let w = vec![txn(0, &[1, 2]), txn(1, &[2, 3]), txn(2, &[4, 5]), txn(3, &[5, 6]), txn(4, &[7, 8])];
        for f in [bfa_assign, ba_assign, ra_assign] {
            assert_eq!(f(&w, 9, 2, 11).unwrap(), f(&w, 9, 2, 11).unwrap());
        }
    }
}
