//! Exact rationals extended with a single positive infinity.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("cannot parse `{0}` as a rational")]
pub struct ParseRationalError(pub String);

pub fn rat(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn parse_rational(s: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError(s.to_string());
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| err())?;
            let d: BigInt = d.trim().parse().map_err(|_| err())?;
            if d.is_zero() {
                return Err(err());
            }
            Ok(BigRational::new(n, d))
        }
        None => {
            let n: BigInt = s.parse().map_err(|_| err())?;
            Ok(BigRational::from_integer(n))
        }
    }
}

pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// A rational or `+inf`. Every finite value is below `Infinite`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExtendedRational {
    Finite(Rational),
    Infinite,
}

impl ExtendedRational {
    pub fn zero() -> Self {
        ExtendedRational::Finite(Rational::zero())
    }

    pub fn from_int(n: i64) -> Self {
        ExtendedRational::Finite(rat(n))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtendedRational::Infinite)
    }

    pub fn is_finite(&self) -> bool {
        !self.is_infinite()
    }

    pub fn finite(&self) -> Option<&Rational> {
        match self {
            ExtendedRational::Finite(r) => Some(r),
            ExtendedRational::Infinite => None,
        }
    }

    pub fn is_positive(&self) -> bool {
        match self {
            ExtendedRational::Finite(r) => r.is_positive(),
            ExtendedRational::Infinite => true,
        }
    }

    pub fn scale(&self, lambda: &Rational) -> Self {
        match self {
            ExtendedRational::Finite(r) => ExtendedRational::Finite(r * lambda),
            ExtendedRational::Infinite => ExtendedRational::Infinite,
        }
    }
}

impl From<Rational> for ExtendedRational {
    fn from(r: Rational) -> Self {
        ExtendedRational::Finite(r)
    }
}

impl Add for &ExtendedRational {
    type Output = ExtendedRational;
    fn add(self, rhs: &ExtendedRational) -> ExtendedRational {
        match (self, rhs) {
            (ExtendedRational::Finite(a), ExtendedRational::Finite(b)) => {
                ExtendedRational::Finite(a + b)
            }
            _ => ExtendedRational::Infinite,
        }
    }
}

impl Add for ExtendedRational {
    type Output = ExtendedRational;
    fn add(self, rhs: ExtendedRational) -> ExtendedRational {
        &self + &rhs
    }
}

impl PartialEq<Rational> for ExtendedRational {
    fn eq(&self, other: &Rational) -> bool {
        self.finite() == Some(other)
    }
}

impl PartialOrd<Rational> for ExtendedRational {
    fn partial_cmp(&self, other: &Rational) -> Option<Ordering> {
        Some(match self {
            ExtendedRational::Finite(r) => r.cmp(other),
            ExtendedRational::Infinite => Ordering::Greater,
        })
    }
}

impl fmt::Display for ExtendedRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedRational::Finite(r) => f.write_str(&format_rational(r)),
            ExtendedRational::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for ExtendedRational {
    type Err = ParseRationalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t == "∞" {
            Ok(ExtendedRational::Infinite)
        } else {
            parse_rational(t).map(ExtendedRational::Finite)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print() {
        let x: ExtendedRational = "6/4".parse().unwrap();
        assert_eq!(x.to_string(), "3/2");
        assert_eq!("inf".parse::<ExtendedRational>().unwrap(), ExtendedRational::Infinite);
        assert_eq!("-7".parse::<ExtendedRational>().unwrap().to_string(), "-7");
        assert!("1/0".parse::<ExtendedRational>().is_err());
        assert!("x".parse::<ExtendedRational>().is_err());
    }

    #[test]
    fn infinity_absorbs_and_dominates() {
        let two = ExtendedRational::from_int(2);
        let inf = ExtendedRational::Infinite;
        assert_eq!(&two + &inf, inf);
        assert!(two < inf);
        assert!(inf >= inf);
        assert_eq!(&two + &two, ExtendedRational::from_int(4));
    }
}
