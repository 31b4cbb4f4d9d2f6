use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::TxnId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub malicious_txn: TxnId,
    pub ibs: BTreeSet<u32>,
    /// Earlier detections whose recovery must finish first.
    pub waits_for: BTreeSet<TxnId>,
    /// Zero-based round in which the recovery can run.
    pub wave: usize,
}

/// Orders recoveries given in detection order. Recoveries on overlapping IB
/// sets run one after another in detection order; disjoint ones may overlap.
pub fn coordinate(detections: &[(TxnId, BTreeSet<u32>)]) -> Vec<ScheduleEntry> {
    let mut out: Vec<ScheduleEntry> = Vec::with_capacity(detections.len());
    for (m, ibs) in detections {
        let before: Vec<&ScheduleEntry> = out.iter().filter(|e| !e.ibs.is_disjoint(ibs)).collect();
        let wave = before.iter().map(|e| e.wave + 1).max().unwrap_or(0);
        let waits_for = before.iter().map(|e| e.malicious_txn).collect();
        out.push(ScheduleEntry { malicious_txn: *m, ibs: ibs.clone(), waits_for, wave });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ibs(xs: &[u32]) -> BTreeSet<u32> {
        xs.iter().copied().collect()
    }

    #[test]
    fn bridging_recovery_waits_for_both() {
        let s = coordinate(&[(TxnId(1), ibs(&[1])), (TxnId(2), ibs(&[2])), (TxnId(3), ibs(&[1, 2]))]);
        assert!(s[0].waits_for.is_empty() && s[1].waits_for.is_empty());
        assert_eq!((s[0].wave, s[1].wave), (0, 0));
        assert_eq!(s[2].waits_for, [TxnId(1), TxnId(2)].into_iter().collect());
        assert_eq!(s[2].wave, 1);
    }

    #[test]
    fn chain_of_overlaps_serialises() {
        let s = coordinate(&[(TxnId(4), ibs(&[0, 1])), (TxnId(5), ibs(&[1, 2])), (TxnId(6), ibs(&[2, 3]))]);
        assert_eq!(s.iter().map(|e| e.wave).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(s[2].waits_for, [TxnId(5)].into_iter().collect());
    }
}
