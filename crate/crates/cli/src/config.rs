//! Experiment configuration: a JSON file whose keys mirror the command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use adrf_core::Quantity;
use adrf_sim::{CostModel, SimConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Inclusive integer range written `LO:HI`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct QuantityRange {
    pub low: Quantity,
    pub high: Quantity,
}

impl QuantityRange {
    pub const fn new(low: Quantity, high: Quantity) -> Self {
        QuantityRange { low, high }
    }
}

impl fmt::Display for QuantityRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.low, self.high)
    }
}

impl FromStr for QuantityRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lo, hi) = s
            .split_once(':')
            .ok_or_else(|| format!("expected LO:HI, got `{s}`"))?;
        let parse = |p: &str| {
            p.trim()
                .parse::<Quantity>()
                .map_err(|_| format!("`{p}` is not a non-negative integer"))
        };
        Ok(QuantityRange::new(parse(lo)?, parse(hi)?))
    }
}

impl TryFrom<String> for QuantityRange {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<QuantityRange> for String {
    fn from(r: QuantityRange) -> Self {
        r.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub users: u32,
    pub resources: usize,
    pub epochs: u64,
    pub demand_range: QuantityRange,
    pub per_user_reserve: u64,
    pub seed: u64,
    /// Trial `t` uses seed `seed + t`.
    pub trials: u64,
    /// Resource counts to run. Empty means just `resources`.
    pub sweep: Vec<usize>,
    pub out: PathBuf,
    /// Reserve range for the Monte-Carlo statistics.
    pub reserve_range: QuantityRange,
    /// Monte-Carlo instances built so that every user's count is an exact multiple.
    pub exact_cycles: bool,
    /// Let the reference DRF loop skip users whose next task does not fit.
    pub skip_unfit: bool,
    pub cost: CostModel,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let sim = SimConfig::default();
        ExperimentConfig {
            users: sim.users,
            resources: sim.resources,
            epochs: sim.epochs,
            demand_range: QuantityRange::new(sim.demand_low, sim.demand_high),
            per_user_reserve: sim.per_user_reserve,
            seed: sim.seed,
            trials: 1,
            sweep: Vec::new(),
            out: PathBuf::from("adrf-out"),
            reserve_range: QuantityRange::new(100, 1000),
            exact_cycles: false,
            skip_unfit: false,
            cost: CostModel::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        Self::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn resource_counts(&self) -> Vec<usize> {
        if self.sweep.is_empty() {
            vec![self.resources]
        } else {
            self.sweep.clone()
        }
    }

    /// Every (resource count, trial) pair in report order.
    pub fn runs(&self) -> Vec<(usize, u64)> {
        self.resource_counts()
            .into_iter()
            .flat_map(|m| (0..self.trials).map(move |t| (m, t)))
            .collect()
    }

    pub fn sim_config(&self, resources: usize, trial: u64) -> SimConfig {
        SimConfig {
            users: self.users,
            resources,
            epochs: self.epochs,
            demand_low: self.demand_range.low,
            demand_high: self.demand_range.high,
            per_user_reserve: self.per_user_reserve,
            seed: self.seed.wrapping_add(trial),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::Config(msg));
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        let mut seen = self.sweep.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.sweep.len() {
            return fail(format!("sweep values must be distinct: {:?}", self.sweep));
        }
        if seen.first() == Some(&0) {
            return fail("sweep values must be at least 1".into());
        }
        if self.reserve_range.low == 0 || self.reserve_range.low > self.reserve_range.high {
            return fail(format!("reserve range {} is invalid", self.reserve_range));
        }
        for m in self.resource_counts() {
            self.sim_config(m, 0)
                .validate()
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(())
    }
}
