//! Iterative Dominant Resource Fairness.
//!
//! The loop repeatedly picks the user whose allocated dominant share (task count times dominant
//! share) is smallest, ties going to the lowest user id, and grants that user one more task. This
//! is the ground truth the precomputed allocators are measured against.

use crate::error::AllocError;
use crate::resource::{AllocationResult, DemandSet, ResourceVector, WeightVector};
use crate::share::{dominant_share, weighted_dominant_share, RationalShare};

/// What the loop does when the selected user's next task no longer fits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum DrfTermination {
    /// Stop the whole allocation at the first selection that does not fit.
    #[default]
    StopAtFirstUnfit,
    /// Retire the unfit user and keep serving the others until nobody fits.
    SkipUnfit,
}

/// DRF with the default termination rule ([`DrfTermination::StopAtFirstUnfit`]).
pub fn drf_allocate(
    demands: &DemandSet,
    reserves: &ResourceVector,
) -> Result<AllocationResult, AllocError> {
    drf_allocate_with(demands, reserves, DrfTermination::default())
}

pub fn drf_allocate_with(
    demands: &DemandSet,
    reserves: &ResourceVector,
    termination: DrfTermination,
) -> Result<AllocationResult, AllocError> {
    demands.check_against(reserves)?;
    let shares = demands
        .iter()
        .map(|(_, d)| dominant_share(d, reserves).map(|(s, _)| s))
        .collect::<Result<Vec<_>, _>>()?;
    run_loop(demands, &shares, reserves, termination)
}

/// Weighted DRF: the loop is unchanged, only the dominant shares are computed against
/// per-user, per-resource weights.
pub fn weighted_drf_allocate(
    demands: &DemandSet,
    weights: &[WeightVector],
    reserves: &ResourceVector,
) -> Result<AllocationResult, AllocError> {
    demands.check_against(reserves)?;
    if weights.len() != demands.len() {
        return Err(AllocError::WeightCountMismatch {
            expected: demands.len(),
            found: weights.len(),
        });
    }
    let shares = demands
        .iter()
        .zip(weights)
        .map(|((_, d), w)| weighted_dominant_share(d, w, reserves).map(|(s, _)| s))
        .collect::<Result<Vec<_>, _>>()?;
    run_loop(demands, &shares, reserves, DrfTermination::default())
}

fn run_loop(
    demands: &DemandSet,
    shares: &[RationalShare],
    reserves: &ResourceVector,
    termination: DrfTermination,
) -> Result<AllocationResult, AllocError> {
    if let Some(resource) = reserves.iter().position(|&r| r == 0) {
        return Err(AllocError::ZeroReserve { resource });
    }
    let n = demands.len();
    let ids: Vec<_> = demands.ids().collect();
    let mut counts = vec![0u64; n];
    let mut levels = vec![RationalShare::ZERO; n];
    let mut active = vec![true; n];
    let mut remaining = reserves.clone();

    loop {
        let pick = (0..n)
            .filter(|&i| active[i])
            .min_by(|&a, &b| levels[a].cmp(&levels[b]).then(ids[a].cmp(&ids[b])));
        let Some(i) = pick else { break };
        let demand = demands.demand(i);
        if demand.fits_within(&remaining) {
            remaining = remaining.checked_sub(demand)?;
            counts[i] += 1;
            levels[i] = levels[i].checked_add(&shares[i])?;
        } else {
            match termination {
                DrfTermination::StopAtFirstUnfit => break,
                DrfTermination::SkipUnfit => active[i] = false,
            }
        }
    }
    AllocationResult::from_counts(demands, reserves, counts, RationalShare::ZERO)
}
