//! Checks that only need a recorded trace.

use std::collections::BTreeMap;

use adrf_core::{
    fixed_pdrf_reference, pdrf_allocate, DemandSet, ResourceVector, UserId, DEFAULT_PRECISION,
};
use adrf_sim::{Call, Trace};

/// Injected totals must equal final balances plus both pools, and no claim may be clamped.
pub fn check_accounting(trace: &Trace) -> Result<(), String> {
    let Some(last) = trace.records.last() else {
        return Ok(());
    };
    if let Some(r) = trace.records.iter().find(|r| r.clamped) {
        return Err(format!("claim clamped at block {}", r.block));
    }
    let machine = trace.header.machine_config();
    let transitions = trace
        .records
        .iter()
        .filter(|r| r.update_cost.is_some())
        .count() as u128;
    let mut balances: BTreeMap<UserId, &ResourceVector> = BTreeMap::new();
    for r in &trace.records {
        if let (Some(user), Some(b)) = (r.call.user(), &r.balance) {
            balances.insert(user, b);
        }
    }
    for res in 0..machine.resources {
        let injected = machine.epoch_reserve[res] as u128 * (transitions + 1);
        let held = last.pools[0][res] as u128
            + last.pools[1][res] as u128
            + balances.values().map(|b| b[res] as u128).sum::<u128>();
        if injected != held {
            return Err(format!(
                "resource {res}: injected {injected} but {held} accounted for"
            ));
        }
    }
    Ok(())
}

/// A machine claim that disagrees with the fixed-point reference.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct ClaimMismatch {
    pub epoch: u64,
    pub block: u64,
    pub user: u32,
    pub machine: String,
    pub reference: String,
}

/// Cross-check of every claiming epoch of one trace.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TraceCrosscheck {
    pub epochs: usize,
    pub claims: usize,
    pub matches: usize,
    /// Fixed-point minus exact-rational task count, one entry per claim.
    pub fixed_minus_rational: Vec<i64>,
    pub first_mismatch: Option<ClaimMismatch>,
}

/// Recomputes each epoch's claims from the recorded demands of the previous epoch and the claim
/// pool as it stood before the transition.
pub fn crosscheck_trace(trace: &Trace) -> Result<TraceCrosscheck, String> {
    let mut demands: BTreeMap<u64, Vec<(UserId, ResourceVector)>> = BTreeMap::new();
    let mut claims: BTreeMap<u64, Vec<(UserId, u64, u64)>> = BTreeMap::new();
    let mut claim_pool: BTreeMap<u64, (ResourceVector, u128, u64)> = BTreeMap::new();
    let mut previous_pools: Option<[ResourceVector; 2]> = None;

    for r in &trace.records {
        match &r.call {
            Call::Demand { user, demand } => {
                demands
                    .entry(r.epoch)
                    .or_default()
                    .push((*user, demand.clone()));
            }
            Call::Claim { user } => {
                if let std::collections::btree_map::Entry::Vacant(slot) = claim_pool.entry(r.epoch)
                {
                    let pools = previous_pools
                        .as_ref()
                        .ok_or_else(|| format!("claim at block {} opens the trace", r.block))?;
                    let parity = (r.epoch % 2) as usize;
                    slot.insert((pools[parity].clone(), r.k_prime, r.block));
                }
                let tasks = r
                    .detail
                    .ok_or_else(|| format!("claim at block {} has no task count", r.block))?;
                claims
                    .entry(r.epoch)
                    .or_default()
                    .push((*user, tasks as u64, r.block));
            }
            Call::Register { .. } | Call::Noop => {}
        }
        previous_pools = Some(r.pools.clone());
    }

    let mut out = TraceCrosscheck::default();
    for (epoch, epoch_claims) in &claims {
        let entries = demands
            .get(&(epoch - 1))
            .ok_or_else(|| format!("claims in epoch {epoch} without demands before"))?;
        let (reserves, k_prime, first_block) = &claim_pool[epoch];
        let set = DemandSet::new(entries.clone()).map_err(|e| e.to_string())?;
        let fixed =
            fixed_pdrf_reference(&set, reserves, DEFAULT_PRECISION).map_err(|e| e.to_string())?;
        let exact = pdrf_allocate(&set, reserves).map_err(|e| e.to_string())?;
        out.epochs += 1;

        if fixed.k_prime != *k_prime && out.first_mismatch.is_none() {
            out.first_mismatch = Some(ClaimMismatch {
                epoch: *epoch,
                block: *first_block,
                user: epoch_claims[0].0 .0,
                machine: format!("k'={k_prime}"),
                reference: format!("k'={}", fixed.k_prime),
            });
        }
        for (user, tasks, block) in epoch_claims {
            let idx = entries
                .iter()
                .position(|(u, _)| u == user)
                .ok_or_else(|| format!("user {user} claimed without a demand"))?;
            out.claims += 1;
            if fixed.task_counts[idx] == *tasks {
                out.matches += 1;
            } else if out.first_mismatch.is_none() {
                out.first_mismatch = Some(ClaimMismatch {
                    epoch: *epoch,
                    block: *block,
                    user: user.0,
                    machine: tasks.to_string(),
                    reference: fixed.task_counts[idx].to_string(),
                });
            }
            out.fixed_minus_rational
                .push(fixed.task_counts[idx] as i64 - exact.task_counts[idx] as i64);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use adrf_sim::{run_simulation, SimConfig};

    fn trace() -> Trace {
        run_simulation(&SimConfig {
            users: 4,
            resources: 3,
            epochs: 5,
            seed: 21,
            ..SimConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn simulated_runs_balance() {
        check_accounting(&trace()).unwrap();
    }

    #[test]
    fn edited_pools_break_the_balance() {
        let mut t = trace();
        let last = t.records.len() - 1;
        t.records[last].pools[1] = t.records[last].pools[1]
            .checked_add(&ResourceVector::filled(3, 1))
            .unwrap();
        assert!(check_accounting(&t).is_err());
    }

    #[test]
    fn simulated_runs_match_the_reference() {
        let check = crosscheck_trace(&trace()).unwrap();
        assert_eq!(check.epochs, 4);
        assert_eq!(check.claims, 16);
        assert_eq!(check.matches, 16);
        assert!(check.first_mismatch.is_none());
        assert!(check.fixed_minus_rational.iter().all(|d| d.abs() <= 1));
    }

    #[test]
    fn edited_claims_are_located() {
        let mut t = trace();
        let i = t
            .records
            .iter()
            .rposition(|r| matches!(r.call, Call::Claim { .. }))
            .unwrap();
        t.records[i].detail = t.records[i].detail.map(|d| d + 1);
        let check = crosscheck_trace(&t).unwrap();
        assert_eq!(check.matches, check.claims - 1);
        assert_eq!(check.first_mismatch.unwrap().block, t.records[i].block);
    }
}
