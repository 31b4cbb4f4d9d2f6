use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::TxnId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detection {
    pub malicious_txn: TxnId,
    pub commit_time: u64,
    pub detect_time: u64,
}

/// Simulated intrusion detector: reports each malicious commit exactly
/// `delta` ticks after it happens. Error rates default to zero.
#[derive(Debug, Clone)]
pub struct Ids {
    delta: u64,
    false_positive_rate: f64,
    false_negative_rate: f64,
    rng: ChaCha8Rng,
    pending: BTreeMap<(u64, u64), Detection>,
}

impl Ids {
    pub fn new(delta: u64, seed: u64) -> Self {
        Ids {
            delta,
            false_positive_rate: 0.0,
            false_negative_rate: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x1d5),
            pending: BTreeMap::new(),
        }
    }

    pub fn with_error_rates(mut self, false_positive: f64, false_negative: f64) -> Self {
        self.false_positive_rate = false_positive;
        self.false_negative_rate = false_negative;
        self
    }

    pub fn delta(&self) -> u64 {
        self.delta
    }

    /// Observes a commit; returns the tick at which it will be reported, if ever.
    pub fn on_commit(&mut self, txn: TxnId, malicious: bool, seq: u64, tick: u64) -> Option<u64> {
        let report = if malicious {
            self.false_negative_rate == 0.0 || !self.rng.random_bool(self.false_negative_rate)
        } else {
            self.false_positive_rate > 0.0 && self.rng.random_bool(self.false_positive_rate)
        };
        if !report {
            return None;
        }
        let detect_time = tick + self.delta;
        self.pending
            .insert((detect_time, seq), Detection { malicious_txn: txn, commit_time: tick, detect_time });
        Some(detect_time)
    }

    /// Drains every detection due at or before `clock`, in commit order.
    pub fn report(&mut self, clock: u64) -> Vec<Detection> {
        let later = self.pending.split_off(&(clock + 1, 0));
        let due = std::mem::replace(&mut self.pending, later);
        due.into_values().collect()
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }
}
