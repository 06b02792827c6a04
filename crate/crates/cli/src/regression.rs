//! Exact least-squares line fitting.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FitError {
    #[error("need at least two distinct x values, found {0}")]
    InsufficientSpread(usize),
    #[error("`{0}` is not a decimal number")]
    BadDecimal(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegressionFit {
    pub slope: BigRational,
    pub intercept: BigRational,
    /// In `[0, 1]`. Exactly 1 when the points are collinear.
    pub r_squared: BigRational,
}

impl RegressionFit {
    pub fn predict(&self, x: i64) -> BigRational {
        &self.intercept + &self.slope * BigRational::from_integer(x.into())
    }

    pub fn residuals(&self, points: &[(i64, BigRational)]) -> Vec<BigRational> {
        points.iter().map(|(x, y)| y - self.predict(*x)).collect()
    }

    pub fn summary(&self) -> FitSummary {
        FitSummary {
            slope: to_f64(&self.slope),
            intercept: to_f64(&self.intercept),
            r_squared: to_f64(&self.r_squared),
            exact_slope: self.slope.to_string(),
            exact_intercept: self.intercept.to_string(),
            exact_r_squared: self.r_squared.to_string(),
        }
    }
}

impl fmt::Display for RegressionFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "cost = {:.3} * m + {:.3} (R^2 = {:.6})",
            to_f64(&self.slope),
            to_f64(&self.intercept),
            to_f64(&self.r_squared)
        )
    }
}

/// Floating-point view of a fit for reports, alongside the exact values as strings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitSummary {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub exact_slope: String,
    pub exact_intercept: String,
    pub exact_r_squared: String,
}

pub fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// Ordinary least squares in exact arithmetic. `R^2 = 1 - SSres/SStot`, taken as 1 when the
/// responses are all equal.
pub fn fit_linear(points: &[(i64, BigRational)]) -> Result<RegressionFit, FitError> {
    let mut xs: Vec<i64> = points.iter().map(|p| p.0).collect();
    xs.sort_unstable();
    xs.dedup();
    if xs.len() < 2 {
        return Err(FitError::InsufficientSpread(xs.len()));
    }

    let n = BigRational::from_integer(BigInt::from(points.len()));
    let mut sx = BigRational::zero();
    let mut sy = BigRational::zero();
    let mut sxx = BigRational::zero();
    let mut sxy = BigRational::zero();
    for (x, y) in points {
        let x = BigRational::from_integer((*x).into());
        sxx += &x * &x;
        sxy += &x * y;
        sx += x;
        sy += y;
    }
    let slope = (&n * &sxy - &sx * &sy) / (&n * &sxx - &sx * &sx);
    let intercept = (&sy - &slope * &sx) / &n;
    let mean = &sy / &n;

    let fit = RegressionFit {
        slope,
        intercept,
        r_squared: BigRational::zero(),
    };
    let ss_res: BigRational = fit.residuals(points).iter().map(|r| r * r).sum();
    let ss_tot: BigRational = points.iter().map(|(_, y)| (y - &mean) * (y - &mean)).sum();
    let r_squared = if ss_tot.is_zero() {
        BigRational::one()
    } else {
        BigRational::one() - ss_res / ss_tot
    };
    Ok(RegressionFit { r_squared, ..fit })
}

/// Parses `123`, `-4.5` or `73092.667` into an exact rational.
pub fn parse_decimal(s: &str) -> Result<BigRational, FitError> {
    let bad = || FitError::BadDecimal(s.to_string());
    let t = s.trim();
    let (negative, digits) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    if int.is_empty()
        || !all_digits(int)
        || !all_digits(frac)
        || (digits.contains('.') && frac.is_empty())
    {
        return Err(bad());
    }
    let numer: BigInt = format!("{int}{frac}").parse().map_err(|_| bad())?;
    let denom = num_traits::pow(BigInt::from(10), frac.len());
    let q = BigRational::new(numer, denom);
    Ok(if negative { -q } else { q })
}

/// Relative distance `|value - target| / |target|`.
pub fn relative_error(value: &BigRational, target: &BigRational) -> BigRational {
    ((value - target) / target).abs()
}
