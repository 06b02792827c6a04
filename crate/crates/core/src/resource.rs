//! Input and output types shared by every allocator.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Index;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::AllocError;
use crate::share::RationalShare;

/// Abstract resource units.
pub type Quantity = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub u32);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Per-resource quantities (reserves, demands, shares, balances). Never empty.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Quantity>", into = "Vec<Quantity>")]
pub struct ResourceVector(Vec<Quantity>);

impl ResourceVector {
    pub fn new(quantities: Vec<Quantity>) -> Result<Self, AllocError> {
        if quantities.is_empty() {
            return Err(AllocError::EmptyVector);
        }
        Ok(ResourceVector(quantities))
    }

    /// All-zero vector over `m` resources. Panics if `m == 0`.
    pub fn zeros(m: usize) -> Self {
        assert!(m > 0, "resource count must be positive");
        ResourceVector(vec![0; m])
    }

    pub fn filled(m: usize, value: Quantity) -> Self {
        assert!(m > 0, "resource count must be positive");
        ResourceVector(vec![value; m])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Quantity] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Quantity> {
        self.0.iter()
    }

    pub fn has_positive(&self) -> bool {
        self.0.iter().any(|&q| q > 0)
    }

    pub fn is_zero(&self) -> bool {
        !self.has_positive()
    }

    /// Componentwise `self <= other`.
    pub fn fits_within(&self, other: &ResourceVector) -> bool {
        self.len() == other.len() && self.0.iter().zip(other.iter()).all(|(a, b)| a <= b)
    }

    pub fn checked_scale(&self, factor: u64) -> Result<ResourceVector, AllocError> {
        self.0
            .iter()
            .map(|&q| q.checked_mul(factor).ok_or(AllocError::Overflow))
            .collect::<Result<Vec<_>, _>>()
            .map(ResourceVector)
    }

    pub fn checked_add(&self, other: &ResourceVector) -> Result<ResourceVector, AllocError> {
        self.zip_with(other, |a, b| a.checked_add(b).ok_or(AllocError::Overflow))
    }

    pub fn checked_sub(&self, other: &ResourceVector) -> Result<ResourceVector, AllocError> {
        self.zip_with(other, |a, b| {
            a.checked_sub(b)
                .ok_or_else(|| AllocError::Negative(format!("{a} - {b}")))
        })
    }

    fn zip_with(
        &self,
        other: &ResourceVector,
        f: impl Fn(Quantity, Quantity) -> Result<Quantity, AllocError>,
    ) -> Result<ResourceVector, AllocError> {
        if self.len() != other.len() {
            return Err(AllocError::DimensionMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        self.0
            .iter()
            .zip(other.iter())
            .map(|(&a, &b)| f(a, b))
            .collect::<Result<Vec<_>, _>>()
            .map(ResourceVector)
    }

    pub fn into_inner(self) -> Vec<Quantity> {
        self.0
    }
}

impl Index<usize> for ResourceVector {
    type Output = Quantity;

    fn index(&self, index: usize) -> &Quantity {
        &self.0[index]
    }
}

impl TryFrom<Vec<Quantity>> for ResourceVector {
    type Error = AllocError;

    fn try_from(value: Vec<Quantity>) -> Result<Self, Self::Error> {
        ResourceVector::new(value)
    }
}

impl From<ResourceVector> for Vec<Quantity> {
    fn from(value: ResourceVector) -> Self {
        value.0
    }
}

/// Comma-separated integers, e.g. `3,12`.
impl fmt::Display for ResourceVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, q) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{q}")?;
        }
        Ok(())
    }
}

impl FromStr for ResourceVector {
    type Err = AllocError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts = s
            .split(',')
            .map(|p| {
                let p = p.trim();
                if p.starts_with('-') {
                    return Err(AllocError::Negative(p.to_string()));
                }
                p.parse::<Quantity>()
                    .map_err(|_| AllocError::Parse(p.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        ResourceVector::new(parts)
    }
}

/// Unit-task demands of a set of users over a common resource set.
///
/// User ids are unique, every vector has the same length, and every demand has a positive
/// component (a user with an all-zero demand has no dominant share).
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(
    try_from = "Vec<(UserId, ResourceVector)>",
    into = "Vec<(UserId, ResourceVector)>"
)]
pub struct DemandSet {
    entries: Vec<(UserId, ResourceVector)>,
}

impl DemandSet {
    pub fn new(entries: Vec<(UserId, ResourceVector)>) -> Result<Self, AllocError> {
        let mut seen = BTreeSet::new();
        let m = entries.first().map(|(_, d)| d.len());
        for (id, demand) in &entries {
            if !seen.insert(*id) {
                return Err(AllocError::DuplicateUser(*id));
            }
            if let Some(m) = m {
                if demand.len() != m {
                    return Err(AllocError::DimensionMismatch {
                        expected: m,
                        found: demand.len(),
                    });
                }
            }
            if demand.is_zero() {
                return Err(AllocError::ZeroDemand(*id));
            }
        }
        Ok(DemandSet { entries })
    }

    /// Assigns ids `0..n` in order.
    pub fn from_vectors(demands: Vec<ResourceVector>) -> Result<Self, AllocError> {
        DemandSet::new(
            demands
                .into_iter()
                .enumerate()
                .map(|(i, d)| (UserId(i as u32), d))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Resource count, or `None` for an empty set.
    pub fn resource_count(&self) -> Option<usize> {
        self.entries.first().map(|(_, d)| d.len())
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &(UserId, ResourceVector)> {
        self.entries.iter()
    }

    pub fn ids(&self) -> impl ExactSizeIterator<Item = UserId> + '_ {
        self.entries.iter().map(|(id, _)| *id)
    }

    pub fn demand(&self, index: usize) -> &ResourceVector {
        &self.entries[index].1
    }

    pub(crate) fn check_against(&self, reserves: &ResourceVector) -> Result<(), AllocError> {
        match self.resource_count() {
            Some(m) if m != reserves.len() => Err(AllocError::DimensionMismatch {
                expected: reserves.len(),
                found: m,
            }),
            _ => Ok(()),
        }
    }
}

impl TryFrom<Vec<(UserId, ResourceVector)>> for DemandSet {
    type Error = AllocError;

    fn try_from(value: Vec<(UserId, ResourceVector)>) -> Result<Self, Self::Error> {
        DemandSet::new(value)
    }
}

impl From<DemandSet> for Vec<(UserId, ResourceVector)> {
    fn from(value: DemandSet) -> Self {
        value.entries
    }
}

/// Strictly positive rational weights, either one per resource or one per user.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<RationalShare>", into = "Vec<RationalShare>")]
pub struct WeightVector(Vec<RationalShare>);

impl WeightVector {
    pub fn new(weights: Vec<RationalShare>) -> Result<Self, AllocError> {
        if let Some(index) = weights.iter().position(|w| w.is_zero()) {
            return Err(AllocError::NonPositiveWeight { index });
        }
        Ok(WeightVector(weights))
    }

    pub fn from_integers(weights: &[u128]) -> Result<Self, AllocError> {
        WeightVector::new(
            weights
                .iter()
                .map(|&w| RationalShare::from_integer(w))
                .collect(),
        )
    }

    pub fn uniform(len: usize) -> Self {
        WeightVector(vec![RationalShare::ONE; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, RationalShare> {
        self.0.iter()
    }
}

impl Index<usize> for WeightVector {
    type Output = RationalShare;

    fn index(&self, index: usize) -> &RationalShare {
        &self.0[index]
    }
}

impl TryFrom<Vec<RationalShare>> for WeightVector {
    type Error = AllocError;

    fn try_from(value: Vec<RationalShare>) -> Result<Self, Self::Error> {
        WeightVector::new(value)
    }
}

impl From<WeightVector> for Vec<RationalShare> {
    fn from(value: WeightVector) -> Self {
        value.0
    }
}

/// Outcome of a DRF-family allocation.
///
/// `allocations[i]` is `task_counts[i]` copies of user `i`'s demand, and `remaining` is what the
/// reserves hold afterwards. `cycles` is the precomputed cycle count `k` (zero for the iterative
/// loop).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub task_counts: Vec<u64>,
    pub allocations: Vec<ResourceVector>,
    pub remaining: ResourceVector,
    pub cycles: RationalShare,
}

impl AllocationResult {
    pub(crate) fn from_counts(
        demands: &DemandSet,
        reserves: &ResourceVector,
        task_counts: Vec<u64>,
        cycles: RationalShare,
    ) -> Result<Self, AllocError> {
        let mut remaining = reserves.clone();
        let mut allocations = Vec::with_capacity(task_counts.len());
        for ((_, demand), &count) in demands.iter().zip(&task_counts) {
            let allocation = demand.checked_scale(count)?;
            remaining = remaining.checked_sub(&allocation)?;
            allocations.push(allocation);
        }
        Ok(AllocationResult {
            task_counts,
            allocations,
            remaining,
            cycles,
        })
    }
}
