//! Exact non-negative fractions and dominant shares.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::AllocError;
use crate::resource::{ResourceVector, WeightVector};

/// A non-negative fraction kept in lowest terms.
///
/// Because the representation is canonical, derived equality is structural equality of values.
/// All arithmetic is checked; overflow of the 128-bit numerator or denominator is reported as
/// [`AllocError::Overflow`] instead of wrapping.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RationalShare(Ratio<u128>);

impl RationalShare {
    pub const ZERO: RationalShare = RationalShare(Ratio::new_raw(0, 1));
    pub const ONE: RationalShare = RationalShare(Ratio::new_raw(1, 1));

    pub fn new(numerator: u128, denominator: u128) -> Result<Self, AllocError> {
        if denominator == 0 {
            return Err(AllocError::ZeroDenominator);
        }
        Ok(RationalShare(Ratio::new(numerator, denominator)))
    }

    pub fn from_integer(value: u128) -> Self {
        RationalShare(Ratio::from_integer(value))
    }

    /// Builds a share from signed parts, rejecting negative values.
    pub fn from_signed(numerator: i128, denominator: i128) -> Result<Self, AllocError> {
        if denominator == 0 {
            return Err(AllocError::ZeroDenominator);
        }
        if numerator != 0 && (numerator < 0) != (denominator < 0) {
            return Err(AllocError::Negative(format!("{numerator}/{denominator}")));
        }
        let n = numerator.unsigned_abs();
        let d = denominator.unsigned_abs();
        Self::new(n, d)
    }

    pub fn numer(&self) -> u128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u128 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, AllocError> {
        CheckedAdd::checked_add(&self.0, &other.0)
            .map(RationalShare)
            .ok_or(AllocError::Overflow)
    }

    /// Subtraction; a negative result is an error, not a wrap.
    pub fn checked_sub(&self, other: &Self) -> Result<Self, AllocError> {
        if other > self {
            return Err(AllocError::Negative(format!("{self} - {other}")));
        }
        CheckedSub::checked_sub(&self.0, &other.0)
            .map(RationalShare)
            .ok_or(AllocError::Overflow)
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self, AllocError> {
        CheckedMul::checked_mul(&self.0, &other.0)
            .map(RationalShare)
            .ok_or(AllocError::Overflow)
    }

    pub fn checked_div(&self, other: &Self) -> Result<Self, AllocError> {
        if other.is_zero() {
            return Err(AllocError::ZeroDenominator);
        }
        CheckedDiv::checked_div(&self.0, &other.0)
            .map(RationalShare)
            .ok_or(AllocError::Overflow)
    }

    pub fn mul_int(&self, factor: u128) -> Result<Self, AllocError> {
        self.checked_mul(&RationalShare::from_integer(factor))
    }

    pub fn floor(&self) -> u128 {
        self.numer() / self.denom()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

impl Default for RationalShare {
    fn default() -> Self {
        RationalShare::ZERO
    }
}

impl fmt::Display for RationalShare {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom() == 1 {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl FromStr for RationalShare {
    type Err = AllocError;

    /// Accepts `n`, `n/d`, with optional leading `-` (rejected as negative).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (num, den) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s, "1"),
        };
        let num: i128 = num.parse().map_err(|_| AllocError::Parse(s.to_string()))?;
        let den: i128 = den.parse().map_err(|_| AllocError::Parse(s.to_string()))?;
        RationalShare::from_signed(num, den)
    }
}

impl Serialize for RationalShare {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RationalShare {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(u64),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Int(v) => Ok(RationalShare::from_integer(v as u128)),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// The largest demand-to-reserve ratio of `demand`, with the index of the resource attaining it.
///
/// Ties resolve to the lowest resource index. Every reserve must be positive.
pub fn dominant_share(
    demand: &ResourceVector,
    reserves: &ResourceVector,
) -> Result<(RationalShare, usize), AllocError> {
    dominant_by(demand, reserves, |_| RationalShare::ONE)
}

/// Dominant share with each resource's reserve scaled by a per-resource weight:
/// `max_r d_r / (w_r * reserve_r)`. Unit weights give exactly [`dominant_share`].
pub fn weighted_dominant_share(
    demand: &ResourceVector,
    weights: &WeightVector,
    reserves: &ResourceVector,
) -> Result<(RationalShare, usize), AllocError> {
    if weights.len() != reserves.len() {
        return Err(AllocError::WeightCountMismatch {
            expected: reserves.len(),
            found: weights.len(),
        });
    }
    dominant_by(demand, reserves, |r| weights[r])
}

fn dominant_by(
    demand: &ResourceVector,
    reserves: &ResourceVector,
    weight: impl Fn(usize) -> RationalShare,
) -> Result<(RationalShare, usize), AllocError> {
    if demand.len() != reserves.len() {
        return Err(AllocError::DimensionMismatch {
            expected: reserves.len(),
            found: demand.len(),
        });
    }
    if let Some(resource) = reserves.iter().position(|&r| r == 0) {
        return Err(AllocError::ZeroReserve { resource });
    }
    if !demand.has_positive() {
        return Err(AllocError::EmptyDemand);
    }
    let mut best: Option<(RationalShare, usize)> = None;
    for (r, (&d, &reserve)) in demand.iter().zip(reserves.iter()).enumerate() {
        let scaled_reserve = weight(r).mul_int(reserve as u128)?;
        let ratio = RationalShare::from_integer(d as u128).checked_div(&scaled_reserve)?;
        match best {
            Some((current, _)) if ratio <= current => {}
            _ => best = Some((ratio, r)),
        }
    }
    // A positive component exists, so at least one ratio was recorded.
    best.ok_or(AllocError::EmptyDemand)
}
