use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::Strategy;

/// How the database is organised for containment and recovery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimStrategy {
    Bfa,
    Ba,
    Ra,
    Sa,
    /// The whole database as one isolation block.
    #[serde(rename = "oneib")]
    OneIb,
    /// Whole-database recovery without isolation blocks or admission control.
    Itdb,
}

impl SimStrategy {
    pub fn partition(self) -> Option<Strategy> {
        match self {
            SimStrategy::Bfa => Some(Strategy::Bfa),
            SimStrategy::Ba => Some(Strategy::Ba),
            SimStrategy::Ra => Some(Strategy::Ra),
            SimStrategy::Sa => Some(Strategy::Sa),
            SimStrategy::OneIb | SimStrategy::Itdb => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SimStrategy::Bfa => "bfa",
            SimStrategy::Ba => "ba",
            SimStrategy::Ra => "ra",
            SimStrategy::Sa => "sa",
            SimStrategy::OneIb => "oneib",
            SimStrategy::Itdb => "itdb",
        }
    }
}

impl fmt::Display for SimStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SimStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bfa" => Ok(SimStrategy::Bfa),
            "ba" => Ok(SimStrategy::Ba),
            "ra" => Ok(SimStrategy::Ra),
            "sa" => Ok(SimStrategy::Sa),
            "oneib" | "one-ib" | "one_ib" => Ok(SimStrategy::OneIb),
            "itdb" => Ok(SimStrategy::Itdb),
            other => Err(Error::Config(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// IDS detection latency in ticks.
    pub delta: u64,
    /// Mean arrivals per tick.
    pub lambda: f64,
    pub k: usize,
    pub strategy: SimStrategy,
    pub delayed_access: bool,
    /// How long boundary tuples stay locked after a write; `None` means ceil(1.5 * delta).
    pub boundary_hold: Option<u64>,
    pub seed: u64,
    /// Log records the dependency analyzer scans per tick.
    pub scan_rate: u64,
    /// Ticks per restored tuple in the undo phase.
    pub undo_cost: u64,
    /// Ticks per re-executed transaction in the redo phase.
    pub redo_cost: u64,
    /// Log passes made by whole-database analysis.
    pub itdb_passes: u64,
    pub false_positive_rate: f64,
    pub false_negative_rate: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            delta: 10,
            lambda: 1.0,
            k: 10,
            strategy: SimStrategy::Bfa,
            delayed_access: true,
            boundary_hold: None,
            seed: 0,
            scan_rate: 50,
            undo_cost: 1,
            redo_cost: 1,
            itdb_passes: 2,
            false_positive_rate: 0.0,
            false_negative_rate: 0.0,
        }
    }
}

impl SimConfig {
    pub fn boundary_hold(&self) -> u64 {
        self.boundary_hold.unwrap_or((3 * self.delta).div_ceil(2))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.scan_rate == 0 {
            return Err(Error::Config("scan_rate must be at least 1".into()));
        }
        if self.itdb_passes == 0 {
            return Err(Error::Config("itdb_passes must be at least 1".into()));
        }
        if self.delayed_access && self.boundary_hold() < self.delta {
            return Err(Error::Config(format!(
                "boundary_hold {} is shorter than delta {}",
                self.boundary_hold(),
                self.delta
            )));
        }
        for (name, r) in [("false_positive_rate", self.false_positive_rate), ("false_negative_rate", self.false_negative_rate)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {r}")));
            }
        }
        Ok(())
    }

    /// Whether boundary tuples are actually held back for this configuration.
    pub fn holds_boundary(&self) -> bool {
        self.delayed_access && self.strategy.partition().is_some()
    }
}
