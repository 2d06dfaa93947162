//! Scalar field abstraction: exact rationals for identity checking, 64-bit
//! floats for flows that need transcendental functions.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational scalar.
pub type Rat = BigRational;

/// Coefficient field of the whole library. Implemented by [`Rat`] (exact
/// mode) and `f64` (float mode); every operation in the crate is generic
/// over it.
pub trait Scalar: Clone + PartialEq + Debug + Display + Send + Sync + 'static {
    /// Whether arithmetic is exact. Exact mode asserts identities at zero,
    /// float mode at a tolerance.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_int(n: i64) -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    /// Parses either an integer, a `p/q` rational or (float mode only) a
    /// decimal literal.
    fn parse(text: &str) -> Result<Self>;

    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn div(&self, rhs: &Self) -> Result<Self>;
    fn neg(&self) -> Self;

    fn is_zero(&self) -> bool;
    fn to_f64(&self) -> f64;
    fn abs_f64(&self) -> f64 {
        self.to_f64().abs()
    }
    /// Canonical text form used in reports: `p/q` in exact mode, shortest
    /// round-trip decimal in float mode.
    fn literal(&self) -> String;
}

impl Scalar for Rat {
    const EXACT: bool = true;

    fn zero() -> Self {
        <Rat as Zero>::zero()
    }

    fn one() -> Self {
        <Rat as One>::one()
    }

    fn from_int(n: i64) -> Self {
        Rat::from_integer(BigInt::from(n))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Rat::new(BigInt::from(num), BigInt::from(den))
    }

    fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if let Some((num, den)) = text.split_once('/') {
            let num: BigInt = num
                .trim()
                .parse()
                .map_err(|_| Error::Parse(text.to_string()))?;
            let den: BigInt = den
                .trim()
                .parse()
                .map_err(|_| Error::Parse(text.to_string()))?;
            if den.is_zero() {
                return Err(Error::Parse(text.to_string()));
            }
            Ok(Rat::new(num, den))
        } else {
            let n: BigInt = text.parse().map_err(|_| Error::Parse(text.to_string()))?;
            Ok(Rat::from_integer(n))
        }
    }

    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }

    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }

    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }

    fn div(&self, rhs: &Self) -> Result<Self> {
        if Zero::is_zero(rhs) {
            return Err(Error::DivisionByZero);
        }
        Ok(self / rhs)
    }

    fn neg(&self) -> Self {
        -self
    }

    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }

    fn to_f64(&self) -> f64 {
        self.numer()
            .to_f64()
            .unwrap_or(f64::NAN)
            / self.denom().to_f64().unwrap_or(f64::NAN)
    }

    fn abs_f64(&self) -> f64 {
        <Self as Scalar>::to_f64(&Signed::abs(self))
    }

    fn literal(&self) -> String {
        self.to_string()
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }

    fn one() -> Self {
        1.0
    }

    fn from_int(n: i64) -> Self {
        n as f64
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if let Some((num, den)) = text.split_once('/') {
            let num: f64 = num
                .trim()
                .parse()
                .map_err(|_| Error::Parse(text.to_string()))?;
            let den: f64 = den
                .trim()
                .parse()
                .map_err(|_| Error::Parse(text.to_string()))?;
            if den == 0.0 {
                return Err(Error::Parse(text.to_string()));
            }
            Ok(num / den)
        } else {
            text.parse().map_err(|_| Error::Parse(text.to_string()))
        }
    }

    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }

    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }

    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }

    fn div(&self, rhs: &Self) -> Result<Self> {
        if *rhs == 0.0 {
            return Err(Error::DivisionByZero);
        }
        Ok(self / rhs)
    }

    fn neg(&self) -> Self {
        -self
    }

    fn is_zero(&self) -> bool {
        *self == 0.0
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn literal(&self) -> String {
        format!("{self}")
    }
}

/// Parity of an integer degree, as used in Koszul signs.
pub(crate) fn parity(d: i32) -> bool {
    d.rem_euclid(2) == 1
}

/// `(-1)^flag` applied to a scalar.
pub(crate) fn signed<S: Scalar>(flag: bool, value: S) -> S {
    if flag {
        value.neg()
    } else {
        value
    }
}
