//! Abstract per-call cost model.
//!
//! Costs are modelled, not metered: each call kind costs `base + per_resource * m`, and a demand
//! call pays `branch` extra for every time its running minimum reciprocal share is replaced. The
//! defaults are the measured EVM regressions for the three contract functions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    Demand,
    Claim,
    UpdateState,
}

impl CallKind {
    pub const ALL: [CallKind; 3] = [CallKind::Demand, CallKind::Claim, CallKind::UpdateState];

    pub fn as_str(&self) -> &'static str {
        match self {
            CallKind::Demand => "demand",
            CallKind::Claim => "claim",
            CallKind::UpdateState => "update_state",
        }
    }
}

impl fmt::Display for CallKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CallKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CallKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown call kind `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffineCost {
    pub per_resource: u64,
    pub base: u64,
}

impl AffineCost {
    pub const fn new(per_resource: u64, base: u64) -> Self {
        AffineCost { per_resource, base }
    }

    pub fn at(&self, m: usize) -> u64 {
        self.base + self.per_resource * m as u64
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModel {
    pub demand: AffineCost,
    pub claim: AffineCost,
    pub update_state: AffineCost,
    /// Extra cost per branch event in a demand call.
    pub branch: u64,
    /// One-time surcharges on a user's first and second demand call.
    pub demand_warmup: [u64; 2],
    /// One-time surcharge on a user's first claim call.
    pub claim_warmup: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            demand: AffineCost::new(13_616, 47_245),
            claim: AffineCost::new(15_130, 36_486),
            update_state: AffineCost::new(11_295, 23_539),
            branch: 0,
            demand_warmup: [0, 0],
            claim_warmup: 0,
        }
    }
}

impl CostModel {
    pub fn affine(&self, kind: CallKind) -> AffineCost {
        match kind {
            CallKind::Demand => self.demand,
            CallKind::Claim => self.claim,
            CallKind::UpdateState => self.update_state,
        }
    }

    pub fn cost_of_call(&self, kind: CallKind, m: usize, branch_events: u32) -> u64 {
        self.affine(kind).at(m) + self.branch * branch_events as u64
    }

    /// Cost of a user's `ordinal`-th call (0-based) of `kind`, warm-up surcharge included.
    pub fn cost_with_warmup(
        &self,
        kind: CallKind,
        m: usize,
        branch_events: u32,
        ordinal: u32,
    ) -> u64 {
        let surcharge = match (kind, ordinal) {
            (CallKind::Demand, 0 | 1) => self.demand_warmup[ordinal as usize],
            (CallKind::Claim, 0) => self.claim_warmup,
            _ => 0,
        };
        self.cost_of_call(kind, m, branch_events) + surcharge
    }
}

/// [`CostModel::cost_of_call`] under the default coefficients.
pub fn cost_of_call(kind: CallKind, m: usize, branch_events: u32) -> u64 {
    CostModel::default().cost_of_call(kind, m, branch_events)
}

/// One point for the cost regressions. Field order is the CSV column order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostRecord {
    pub call_kind: CallKind,
    pub m: usize,
    pub epoch: u64,
    pub user: u32,
    pub cost_units: u64,
}
