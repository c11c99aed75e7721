//! Exact rationals and the scalar abstraction shared by exact and floating tables.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Arbitrary-precision rational, always kept in lowest terms.
pub type Rational = BigRational;

/// Tolerance used wherever floating tables are compared against exact identities.
pub const FLOAT_TOLERANCE: f64 = 1e-12;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// 2^exp for any integer exponent.
pub fn pow2(exp: i32) -> Rational {
    let p = BigInt::one() << exp.unsigned_abs();
    if exp >= 0 {
        Rational::from_integer(p)
    } else {
        Rational::new(BigInt::one(), p)
    }
}

/// "num/den" text form; integers render as "n/1".
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Accepts "num/den" or a bare integer.
pub fn parse_rational(s: &str) -> Result<Rational, Error> {
    let s = s.trim();
    let bad = || Error::Parse(format!("malformed rational {s:?}"));
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num: BigInt = num.parse().map_err(|_| bad())?;
    let den: BigInt = den.parse().map_err(|_| bad())?;
    if den.is_zero() {
        return Err(Error::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(Rational::new(num, den))
}

/// Exact square root when both numerator and denominator are perfect squares.
pub fn exact_sqrt(r: &Rational) -> Option<Rational> {
    if r.is_negative() {
        return None;
    }
    let n = r.numer().sqrt();
    let d = r.denom().sqrt();
    (&n * &n == *r.numer() && &d * &d == *r.denom()).then(|| Rational::new(n, d))
}

pub fn to_f64(r: &Rational) -> f64 {
    ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
}

/// One serialized table entry: exact entries are strings, float entries numbers.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Entry {
    Exact(String),
    Float(f64),
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Rational,
    Float,
}

/// Scalar type of a probability table.
///
/// Implemented by [`Rational`] (exact verification path) and `f64`
/// (sampling path). Equality tests go through [`Probability::close_to`],
/// which is exact for rationals and uses [`FLOAT_TOLERANCE`] for floats.
pub trait Probability:
    Clone + PartialOrd + Debug + Display + Num + Signed + FromPrimitive + Send + Sync + 'static
{
    const MODE: Mode;

    fn close_to(&self, other: &Self) -> bool;
    fn from_rational(r: &Rational) -> Self;
    fn to_f64(&self) -> f64;
    fn to_entry(&self) -> Entry;
    fn from_entry(e: &Entry) -> Result<Self, Error>;

    fn half() -> Self {
        Self::one() / (Self::one() + Self::one())
    }

    fn pow2(exp: i32) -> Self {
        Self::from_rational(&pow2(exp))
    }

    /// `self <= other`, with float slack.
    fn at_most(&self, other: &Self) -> bool {
        *self <= *other || self.close_to(other)
    }
}

impl Probability for Rational {
    const MODE: Mode = Mode::Rational;

    fn close_to(&self, other: &Self) -> bool {
        self == other
    }

    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }

    fn to_f64(&self) -> f64 {
        to_f64(self)
    }

    fn to_entry(&self) -> Entry {
        Entry::Exact(format_rational(self))
    }

    fn from_entry(e: &Entry) -> Result<Self, Error> {
        match e {
            Entry::Exact(s) => parse_rational(s),
            Entry::Float(x) => Err(Error::Parse(format!(
                "float entry {x} in a rational table; write it as \"num/den\""
            ))),
        }
    }
}

impl Probability for f64 {
    const MODE: Mode = Mode::Float;

    fn close_to(&self, other: &Self) -> bool {
        (self - other).abs() <= FLOAT_TOLERANCE
    }

    fn from_rational(r: &Rational) -> Self {
        to_f64(r)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn to_entry(&self) -> Entry {
        Entry::Float(*self)
    }

    fn from_entry(e: &Entry) -> Result<Self, Error> {
        match e {
            Entry::Float(x) => Ok(*x),
            Entry::Exact(s) => Ok(to_f64(&parse_rational(s)?)),
        }
    }
}

pub(crate) mod serde_rational {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}
