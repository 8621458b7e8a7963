//! Exact barter-credit arithmetic.
//!
//! Credits are reduced rationals, not floats, so ledger conservation and
//! replay checks compare exactly. Magnitudes in this market are small
//! (instance values are sums of single-digit weights, fractions have
//! denominators bounded by the minute clock), so `i64` numerators and
//! denominators are ample.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{Signed, Zero};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

/// A signed amount of barter credits.
///
/// Most quantities in the market (prices, budgets, balances) are credits;
/// negative values appear only in account balances, where they represent
/// outstanding debt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Credits(Ratio<i64>);

impl Credits {
    pub const ZERO: Credits = Credits(Ratio::new_raw(0, 1));

    pub fn from_integer(n: i64) -> Self {
        Credits(Ratio::from_integer(n))
    }

    pub fn new(numer: i64, denom: i64) -> Self {
        Credits(Ratio::new(numer, denom))
    }

    pub fn ratio(self) -> Ratio<i64> {
        self.0
    }

    pub fn is_negative(self) -> bool {
        self.0.is_negative()
    }

    pub fn is_zero(self) -> bool {
        self.0.is_zero()
    }

    pub fn abs(self) -> Self {
        Credits(self.0.abs())
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// Lossy conversion for report columns and plots; never used in
    /// settlement or conservation paths.
    pub fn to_f64(self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }

    /// Canonical text form: plain integer when the reduced denominator is 1,
    /// `numer/denom` otherwise. This is the bit-exact representation used in
    /// datasets, logs, and replay comparisons.
    pub fn canonical(self) -> String {
        if *self.0.denom() == 1 {
            format!("{}", self.0.numer())
        } else {
            format!("{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Display for Credits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

/// Parse error for credit amounts.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("invalid credit amount {0:?}: expected an integer, fraction `n/d`, or decimal")]
pub struct ParseCreditsError(String);

impl FromStr for Credits {
    type Err = ParseCreditsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || ParseCreditsError(s.to_string());
        if let Some((n, d)) = s.split_once('/') {
            let numer: i64 = n.trim().parse().map_err(|_| bad())?;
            let denom: i64 = d.trim().parse().map_err(|_| bad())?;
            if denom == 0 {
                return Err(bad());
            }
            return Ok(Credits(Ratio::new(numer, denom)));
        }
        if let Some((whole, frac)) = s.split_once('.') {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let negative = whole.trim_start().starts_with('-');
            let whole: i64 = if whole == "-" { 0 } else { whole.parse().map_err(|_| bad())? };
            let digits: i64 = frac.parse().map_err(|_| bad())?;
            let scale = 10i64.checked_pow(frac.len() as u32).ok_or_else(bad)?;
            let frac_part = Ratio::new(digits, scale);
            let whole_part = Ratio::from_integer(whole);
            let value = if negative { whole_part - frac_part } else { whole_part + frac_part };
            return Ok(Credits(value));
        }
        let n: i64 = s.parse().map_err(|_| bad())?;
        Ok(Credits(Ratio::from_integer(n)))
    }
}

impl Serialize for Credits {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.canonical())
    }
}

impl<'de> Deserialize<'de> for Credits {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

impl From<i64> for Credits {
    fn from(n: i64) -> Self {
        Credits::from_integer(n)
    }
}

impl Add for Credits {
    type Output = Credits;
    fn add(self, rhs: Credits) -> Credits {
        Credits(self.0 + rhs.0)
    }
}

impl AddAssign for Credits {
    fn add_assign(&mut self, rhs: Credits) {
        self.0 += rhs.0;
    }
}

impl Sub for Credits {
    type Output = Credits;
    fn sub(self, rhs: Credits) -> Credits {
        Credits(self.0 - rhs.0)
    }
}

impl SubAssign for Credits {
    fn sub_assign(&mut self, rhs: Credits) {
        self.0 -= rhs.0;
    }
}

impl Neg for Credits {
    type Output = Credits;
    fn neg(self) -> Credits {
        Credits(-self.0)
    }
}

impl Mul for Credits {
    type Output = Credits;
    fn mul(self, rhs: Credits) -> Credits {
        Credits(self.0 * rhs.0)
    }
}

impl Mul<Ratio<i64>> for Credits {
    type Output = Credits;
    fn mul(self, rhs: Ratio<i64>) -> Credits {
        Credits(self.0 * rhs)
    }
}

impl Mul<i64> for Credits {
    type Output = Credits;
    fn mul(self, rhs: i64) -> Credits {
        Credits(self.0 * Ratio::from_integer(rhs))
    }
}

impl Div<i64> for Credits {
    type Output = Credits;
    fn div(self, rhs: i64) -> Credits {
        Credits(self.0 / Ratio::from_integer(rhs))
    }
}

impl Sum for Credits {
    fn sum<I: Iterator<Item = Credits>>(iter: I) -> Credits {
        iter.fold(Credits::ZERO, |acc, c| acc + c)
    }
}

/// Reputation points in `[0, 10]`, the running mean of received feedback.
///
/// Kept as an exact rational so replaying a feedback history reproduces the
/// stored rank bit-for-bit. Ranks add to credit amounts raw (no
/// normalisation) in the selection utility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rank(Ratio<i64>);

impl Rank {
    pub const ZERO: Rank = Rank(Ratio::new_raw(0, 1));

    pub fn from_integer(n: i64) -> Self {
        Rank(Ratio::from_integer(n))
    }

    pub fn from_ratio(r: Ratio<i64>) -> Self {
        Rank(r)
    }

    pub fn ratio(self) -> Ratio<i64> {
        self.0
    }

    /// Mean of a list of point values; `None` when empty.
    pub fn mean_of(points: &[Ratio<i64>]) -> Option<Rank> {
        if points.is_empty() {
            return None;
        }
        let sum: Ratio<i64> = points.iter().sum();
        Some(Rank(sum / Ratio::from_integer(points.len() as i64)))
    }

    pub fn canonical(self) -> String {
        Credits(self.0).canonical()
    }

    /// Rank points reinterpreted as a raw credit amount for the utility sum.
    pub fn as_credit_points(self) -> Credits {
        Credits(self.0)
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

impl Serialize for Rank {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.canonical())
    }
}

impl<'de> Deserialize<'de> for Rank {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        let credits: Credits = s.parse().map_err(de::Error::custom)?;
        Ok(Rank(credits.ratio()))
    }
}
