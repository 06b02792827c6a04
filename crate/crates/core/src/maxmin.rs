//! Max-min fairness over a single divisible resource.
//!
//! Users submit a maximum demand. Each round every unsatisfied user is offered a share of what
//! is left (equal for plain MF, weight-proportional for WMF), takes the smaller of that share and
//! its outstanding demand, and satisfied users drop out. The residue of a round is re-split in the
//! next one. A round either satisfies someone or hands out the whole residue, so at most `n`
//! rounds run.

use crate::error::AllocError;
use crate::resource::WeightVector;
use crate::share::RationalShare;

/// Progressive filling with equal shares.
///
/// Returns one allocation per demand, in input order. An empty demand list yields an empty
/// allocation.
pub fn progressive_filling(
    demands: &[RationalShare],
    reserve: RationalShare,
) -> Result<Vec<RationalShare>, AllocError> {
    let mut allocations = vec![RationalShare::ZERO; demands.len()];
    let mut active: Vec<usize> = (0..demands.len())
        .filter(|&i| !demands[i].is_zero())
        .collect();
    let mut residue = reserve;

    while !active.is_empty() && !residue.is_zero() {
        let fair = residue.checked_div(&RationalShare::from_integer(active.len() as u128))?;
        let mut handed_out = RationalShare::ZERO;
        for &i in &active {
            let outstanding = demands[i].checked_sub(&allocations[i])?;
            let grant = outstanding.min(fair);
            allocations[i] = allocations[i].checked_add(&grant)?;
            handed_out = handed_out.checked_add(&grant)?;
        }
        residue = residue.checked_sub(&handed_out)?;
        active.retain(|&i| allocations[i] < demands[i]);
    }
    Ok(allocations)
}

/// Progressive filling where each round's shares are proportional to per-user weights:
/// user `i` is offered `w_i / sum_active(w) * residue`.
pub fn weighted_progressive_filling(
    demands: &[RationalShare],
    weights: &WeightVector,
    reserve: RationalShare,
) -> Result<Vec<RationalShare>, AllocError> {
    if weights.len() != demands.len() {
        return Err(AllocError::WeightCountMismatch {
            expected: demands.len(),
            found: weights.len(),
        });
    }
    let mut allocations = vec![RationalShare::ZERO; demands.len()];
    let mut active: Vec<usize> = (0..demands.len())
        .filter(|&i| !demands[i].is_zero())
        .collect();
    let mut residue = reserve;

    while !active.is_empty() && !residue.is_zero() {
        let total_weight = active
            .iter()
            .try_fold(RationalShare::ZERO, |acc, &i| acc.checked_add(&weights[i]))?;
        let mut handed_out = RationalShare::ZERO;
        for &i in &active {
            let offered = weights[i]
                .checked_div(&total_weight)?
                .checked_mul(&residue)?;
            let outstanding = demands[i].checked_sub(&allocations[i])?;
            let grant = outstanding.min(offered);
            allocations[i] = allocations[i].checked_add(&grant)?;
            handed_out = handed_out.checked_add(&grant)?;
        }
        residue = residue.checked_sub(&handed_out)?;
        active.retain(|&i| allocations[i] < demands[i]);
    }
    Ok(allocations)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(v: &[u128]) -> Vec<RationalShare> {
        v.iter().map(|&x| RationalShare::from_integer(x)).collect()
    }

    #[test]
    fn residue_is_resplit() {
        // Round 1 offers 10/3: the demand of 2 is met, 4/3 residue re-split between the others.
        let out = progressive_filling(&ints(&[2, 4, 6]), RationalShare::from_integer(10)).unwrap();
        assert_eq!(out, ints(&[2, 4, 4]));
    }

    #[test]
    fn ample_reserve_meets_every_demand() {
        let out = progressive_filling(&ints(&[1, 1, 1]), RationalShare::from_integer(100)).unwrap();
        assert_eq!(out, ints(&[1, 1, 1]));
    }

    #[test]
    fn scarce_reserve_splits_evenly() {
        let out = progressive_filling(&ints(&[5, 5]), RationalShare::from_integer(4)).unwrap();
        assert_eq!(out, ints(&[2, 2]));
    }

    #[test]
    fn fractional_shares_stay_exact() {
        let out = progressive_filling(&ints(&[5, 5, 5]), RationalShare::from_integer(4)).unwrap();
        assert_eq!(out, vec![RationalShare::new(4, 3).unwrap(); 3]);
    }

    #[test]
    fn empty_and_zero_demands() {
        assert!(progressive_filling(&[], RationalShare::from_integer(3))
            .unwrap()
            .is_empty());
        let out = progressive_filling(&ints(&[0, 7]), RationalShare::from_integer(3)).unwrap();
        assert_eq!(out, ints(&[0, 3]));
        let out = progressive_filling(&ints(&[4, 7]), RationalShare::ZERO).unwrap();
        assert_eq!(out, ints(&[0, 0]));
    }

    #[test]
    fn weighted_examples() {
        let w = |v: &[u128]| WeightVector::from_integers(v).unwrap();
        let r = RationalShare::from_integer;
        assert_eq!(
            weighted_progressive_filling(&ints(&[10, 10, 10]), &w(&[1, 1, 2]), r(8)).unwrap(),
            ints(&[2, 2, 4])
        );
        assert_eq!(
            weighted_progressive_filling(&ints(&[2, 4, 6]), &w(&[1, 1, 1]), r(10)).unwrap(),
            ints(&[2, 4, 4])
        );
        // Offers (6, 2); the demand of 1 is met and its residue of 5 goes to user 2.
        assert_eq!(
            weighted_progressive_filling(&ints(&[1, 9]), &w(&[3, 1]), r(8)).unwrap(),
            ints(&[1, 7])
        );
    }

    #[test]
    fn weighted_rejects_count_mismatch() {
        let w = WeightVector::from_integers(&[1, 1]).unwrap();
        assert_eq!(
            weighted_progressive_filling(&ints(&[1, 2, 3]), &w, RationalShare::ONE),
            Err(AllocError::WeightCountMismatch {
                expected: 3,
                found: 2
            })
        );
    }
}
