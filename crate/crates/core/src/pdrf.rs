//! Precomputed Dominant Resource Fairness.
//!
//! Under progressive filling, user `i` takes `ds*/ds_i` tasks for every task taken by the user
//! with the largest dominant share `ds*`. One such cycle drains `sum_i (ds*/ds_i) * d_ir` of
//! resource `r`, so the number of cycles before some resource runs out is
//!
//! ```text
//! k = min_r  reserve_r / sum_i (ds*/ds_i) * d_ir
//! ```
//!
//! and each user receives `floor(k * ds*/ds_i)` tasks at once. Resources nobody demands do not
//! constrain `k`.

use serde::{Deserialize, Serialize};

use crate::drf::{drf_allocate_with, DrfTermination};
use crate::error::AllocError;
use crate::resource::{AllocationResult, DemandSet, ResourceVector, WeightVector};
use crate::share::{dominant_share, weighted_dominant_share, RationalShare};

pub fn pdrf_allocate(
    demands: &DemandSet,
    reserves: &ResourceVector,
) -> Result<AllocationResult, AllocError> {
    demands.check_against(reserves)?;
    let shares = demands
        .iter()
        .map(|(_, d)| dominant_share(d, reserves).map(|(s, _)| s))
        .collect::<Result<Vec<_>, _>>()?;
    precompute(demands, &shares, reserves)
}

/// PDRF over weighted dominant shares, one weight vector (per resource) for each user.
pub fn weighted_pdrf_allocate(
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
    precompute(demands, &shares, reserves)
}

fn precompute(
    demands: &DemandSet,
    shares: &[RationalShare],
    reserves: &ResourceVector,
) -> Result<AllocationResult, AllocError> {
    if let Some(resource) = reserves.iter().position(|&r| r == 0) {
        return Err(AllocError::ZeroReserve { resource });
    }
    let Some(&top) = shares.iter().max() else {
        return AllocationResult::from_counts(demands, reserves, Vec::new(), RationalShare::ZERO);
    };
    let ratios = shares
        .iter()
        .map(|s| top.checked_div(s))
        .collect::<Result<Vec<_>, _>>()?;

    let mut cycles: Option<RationalShare> = None;
    for (r, &reserve) in reserves.iter().enumerate() {
        let mut drain = RationalShare::ZERO;
        for ((_, demand), ratio) in demands.iter().zip(&ratios) {
            drain = drain.checked_add(&ratio.mul_int(demand[r] as u128)?)?;
        }
        if drain.is_zero() {
            continue;
        }
        let k = RationalShare::from_integer(reserve as u128).checked_div(&drain)?;
        cycles = Some(cycles.map_or(k, |c| c.min(k)));
    }
    let cycles = cycles.unwrap_or(RationalShare::ZERO);

    let counts = ratios
        .iter()
        .map(|ratio| {
            let tasks = cycles.checked_mul(ratio)?.floor();
            u64::try_from(tasks).map_err(|_| AllocError::Overflow)
        })
        .collect::<Result<Vec<_>, _>>()?;
    AllocationResult::from_counts(demands, reserves, counts, cycles)
}

/// Per-user difference between the DRF loop and PDRF.
///
/// `deltas[i]` is DRF tasks minus PDRF tasks for user `i`. Positive values are PDRF
/// underallocation, negative values overallocation.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffStats {
    pub deltas: Vec<i64>,
    pub exact: usize,
    pub under_by_one: usize,
    pub under_by_more: usize,
    pub over: usize,
}

impl DiffStats {
    pub fn from_deltas(deltas: Vec<i64>) -> Self {
        let mut stats = DiffStats::default();
        for &d in &deltas {
            match d {
                0 => stats.exact += 1,
                1 => stats.under_by_one += 1,
                d if d > 1 => stats.under_by_more += 1,
                _ => stats.over += 1,
            }
        }
        stats.deltas = deltas;
        stats
    }

    pub fn users(&self) -> usize {
        self.deltas.len()
    }
}

pub fn compare_pdrf_drf(
    demands: &DemandSet,
    reserves: &ResourceVector,
) -> Result<DiffStats, AllocError> {
    compare_pdrf_drf_with(demands, reserves, DrfTermination::default())
}

pub fn compare_pdrf_drf_with(
    demands: &DemandSet,
    reserves: &ResourceVector,
    termination: DrfTermination,
) -> Result<DiffStats, AllocError> {
    let drf = drf_allocate_with(demands, reserves, termination)?;
    let pdrf = pdrf_allocate(demands, reserves)?;
    let deltas = drf
        .task_counts
        .iter()
        .zip(&pdrf.task_counts)
        .map(|(&a, &b)| a as i64 - b as i64)
        .collect();
    Ok(DiffStats::from_deltas(deltas))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[&[u64]]) -> DemandSet {
        DemandSet::from_vectors(
            v.iter()
                .map(|d| ResourceVector::new(d.to_vec()).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn rv(v: &[u64]) -> ResourceVector {
        ResourceVector::new(v.to_vec()).unwrap()
    }

    fn q(n: u128, d: u128) -> RationalShare {
        RationalShare::new(n, d).unwrap()
    }

    #[test]
    fn two_user_two_resource() {
        // ds = (2/9, 1/3); ratios (3/2, 1); k = min(9/4.5, 18/7) = 2
        let out = pdrf_allocate(&set(&[&[1, 4], &[3, 1]]), &rv(&[9, 18])).unwrap();
        assert_eq!(out.cycles, q(2, 1));
        assert_eq!(out.task_counts, vec![3, 2]);
        assert_eq!(out.allocations, vec![rv(&[3, 12]), rv(&[6, 2])]);
        assert_eq!(out.remaining, rv(&[0, 4]));
    }

    #[test]
    fn single_user_takes_everything() {
        let out = pdrf_allocate(&set(&[&[1, 1]]), &rv(&[5, 5])).unwrap();
        assert_eq!(out.cycles, q(5, 1));
        assert_eq!(out.task_counts, vec![5]);
        assert_eq!(out.remaining, rv(&[0, 0]));
    }

    #[test]
    fn fractional_cycle_count() {
        // Equal dominant shares: k = 6/4.
        let out = pdrf_allocate(&set(&[&[1, 3], &[3, 1]]), &rv(&[6, 6])).unwrap();
        assert_eq!(out.cycles, q(3, 2));
        assert_eq!(out.task_counts, vec![1, 1]);
    }

    #[test]
    fn undemanded_resource_does_not_bind() {
        // ratios (1, 2), resource 0 drains 2*1 + 1*2 per cycle
        let out = pdrf_allocate(&set(&[&[2, 0], &[1, 0]]), &rv(&[9, 1])).unwrap();
        assert_eq!(out.cycles, q(9, 4));
        assert_eq!(out.task_counts, vec![2, 4]);
        assert_eq!(out.remaining, rv(&[1, 1]));
    }

    #[test]
    fn weighted_examples() {
        let w = |v: &[u128]| WeightVector::from_integers(v).unwrap();
        let unit = weighted_pdrf_allocate(
            &set(&[&[1, 4], &[3, 1]]),
            &[w(&[1, 1]), w(&[1, 1])],
            &rv(&[9, 18]),
        )
        .unwrap();
        assert_eq!(unit.task_counts, vec![3, 2]);
        let sym = weighted_pdrf_allocate(
            &set(&[&[1, 1], &[1, 1]]),
            &[w(&[1, 1]), w(&[1, 1])],
            &rv(&[4, 4]),
        )
        .unwrap();
        assert_eq!(sym.task_counts, vec![2, 2]);
        let heavy = weighted_pdrf_allocate(
            &set(&[&[1, 1], &[1, 1]]),
            &[w(&[2, 2]), w(&[1, 1])],
            &rv(&[6, 6]),
        )
        .unwrap();
        assert_eq!(heavy.task_counts, vec![4, 2]);
        assert!(matches!(
            weighted_pdrf_allocate(&set(&[&[1, 1]]), &[], &rv(&[6, 6])),
            Err(AllocError::WeightCountMismatch { .. })
        ));
    }

    #[test]
    fn empty_demand_set() {
        let out = pdrf_allocate(&DemandSet::default(), &rv(&[4])).unwrap();
        assert!(out.task_counts.is_empty());
        assert_eq!(out.cycles, RationalShare::ZERO);
        assert_eq!(out.remaining, rv(&[4]));
    }

    #[test]
    fn comparison_on_matching_instance() {
        let stats = compare_pdrf_drf(&set(&[&[1, 4], &[3, 1]]), &rv(&[9, 18])).unwrap();
        assert_eq!(stats.deltas, vec![0, 0]);
        assert_eq!((stats.exact, stats.under_by_one, stats.over), (2, 0, 0));
    }

    #[test]
    fn exact_cycle_instances_agree() {
        // Identical demands with reserves a whole number of cycles: k is integral and every
        // ds divides ds*.
        for users in 1..6u64 {
            let demands = set(&vec![&[2u64, 3][..]; users as usize]);
            let reserves = rv(&[2 * users * 7, 3 * users * 7]);
            let stats = compare_pdrf_drf(&demands, &reserves).unwrap();
            assert_eq!(stats.exact, users as usize, "users={users}");
        }
    }

    #[test]
    fn diff_stats_buckets() {
        let s = DiffStats::from_deltas(vec![0, 1, 2, -1, 1]);
        assert_eq!(
            (s.exact, s.under_by_one, s.under_by_more, s.over),
            (1, 2, 1, 1)
        );
    }
}
