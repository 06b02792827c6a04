//! Integer fixed-point arithmetic for the contract model.
//!
//! Fractions are carried as integers multiplied by a precision factor `p`, and every division
//! rounds down. Dominant shares are stored as reciprocals `ds' = floor(p * reserve / demand)`
//! minimised over the demanded resources, so the largest dominant share becomes the smallest
//! reciprocal `ds'*`.

use serde::{Deserialize, Serialize};

use super::MachineError;
use crate::resource::{DemandSet, ResourceVector};

/// Six decimal digits.
pub const DEFAULT_PRECISION: u128 = 1_000_000;

/// `floor(a / b)`. Every division in the machine goes through here.
pub fn fixed_floor_div(a: u128, b: u128) -> Result<u128, MachineError> {
    if b == 0 {
        return Err(MachineError::DivisionByZero);
    }
    Ok(a / b)
}

pub(crate) fn mul(a: u128, b: u128) -> Result<u128, MachineError> {
    a.checked_mul(b).ok_or(MachineError::Overflow)
}

pub(crate) fn add(a: u128, b: u128) -> Result<u128, MachineError> {
    a.checked_add(b).ok_or(MachineError::Overflow)
}

/// Intermediate values and task counts of a batch fixed-point PDRF computation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPdrf {
    pub recip_shares: Vec<u128>,
    pub min_recip_share: u128,
    pub scaled_demand_sums: Vec<u128>,
    pub k_prime: u128,
    pub task_counts: Vec<u64>,
}

/// Fixed-point PDRF computed in one pass over a complete demand set.
///
/// This mirrors the arithmetic the contract performs across many transactions but shares no
/// code with [`super::Machine`]: reciprocals are computed for every user, the minimum reciprocal
/// and the scaled sums are aggregated over the whole set, then
///
/// ```text
/// k'    = min_r floor(ds'* * reserve_r * p / sds_r)       (resources with sds_r > 0)
/// ratio = floor(ds'_i * p / ds'*)
/// tasks = floor(ratio * k' / p^2)
/// ```
pub fn fixed_pdrf_reference(
    demands: &DemandSet,
    reserves: &ResourceVector,
    precision: u128,
) -> Result<FixedPdrf, MachineError> {
    if let Some(m) = demands.resource_count() {
        if m != reserves.len() {
            return Err(MachineError::DimensionMismatch {
                expected: reserves.len(),
                found: m,
            });
        }
    }
    let m = reserves.len();

    let mut recip_shares = Vec::with_capacity(demands.len());
    for (user, demand) in demands.iter() {
        let mut best: Option<u128> = None;
        for r in 0..m {
            if demand[r] == 0 {
                continue;
            }
            if reserves[r] == 0 {
                return Err(MachineError::ZeroReserve { resource: r });
            }
            let candidate =
                fixed_floor_div(mul(precision, reserves[r] as u128)?, demand[r] as u128)?;
            best = Some(best.map_or(candidate, |b| b.min(candidate)));
        }
        match best {
            Some(0) => return Err(MachineError::DemandBelowPrecision { user: *user }),
            Some(v) => recip_shares.push(v),
            None => return Err(MachineError::ZeroDemand { user: *user }),
        }
    }

    let Some(&min_recip_share) = recip_shares.iter().min() else {
        return Ok(FixedPdrf {
            recip_shares,
            min_recip_share: 0,
            scaled_demand_sums: vec![0; m],
            k_prime: 0,
            task_counts: Vec::new(),
        });
    };

    let mut scaled_demand_sums = vec![0u128; m];
    for ((_, demand), &recip) in demands.iter().zip(&recip_shares) {
        for (sum, &d) in scaled_demand_sums.iter_mut().zip(demand.iter()) {
            *sum = add(*sum, mul(recip, d as u128)?)?;
        }
    }

    let mut k_prime: Option<u128> = None;
    for (r, &sum) in scaled_demand_sums.iter().enumerate() {
        if sum == 0 {
            continue;
        }
        let numerator = mul(mul(min_recip_share, reserves[r] as u128)?, precision)?;
        let k = fixed_floor_div(numerator, sum)?;
        k_prime = Some(k_prime.map_or(k, |c| c.min(k)));
    }
    let k_prime = k_prime.unwrap_or(0);

    let p_squared = mul(precision, precision)?;
    let task_counts = recip_shares
        .iter()
        .map(|&recip| {
            let ratio = fixed_floor_div(mul(recip, precision)?, min_recip_share)?;
            let tasks = fixed_floor_div(mul(ratio, k_prime)?, p_squared)?;
            u64::try_from(tasks).map_err(|_| MachineError::Overflow)
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(FixedPdrf {
        recip_shares,
        min_recip_share,
        scaled_demand_sums,
        k_prime,
        task_counts,
    })
}
