//! Exact rational scalars and the `"num/den"` text encoding used at every
//! serialization boundary.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// Exact probability / amplitude scalar. Always kept in canonical form
/// (gcd 1, positive denominator) by `BigRational`.
pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

pub fn half() -> Rational {
    ratio(1, 2)
}

/// The bounded-error threshold 2/3 (closed inequality).
pub fn two_thirds() -> Rational {
    ratio(2, 3)
}

pub fn is_probability(q: &Rational) -> bool {
    !q.is_negative() && *q <= one()
}

/// Parses `"n"`, `"n/d"` or `"-n/d"` (surrounding whitespace allowed).
pub fn parse(text: &str) -> Result<Rational, Error> {
    let bad = || Error::Parse(format!("invalid rational literal {text:?}"));
    let text = text.trim();
    let (num, den) = match text.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (text, "1"),
    };
    let num: BigInt = num.parse().map_err(|_| bad())?;
    let den: BigInt = den.parse().map_err(|_| bad())?;
    if den.is_zero() {
        return Err(Error::Parse(format!("zero denominator in {text:?}")));
    }
    Ok(Rational::new(num, den))
}

/// Canonical text form: `"n"` for integers, `"n/d"` otherwise.
pub fn format(q: &Rational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Serde adapter so rationals travel as `"num/den"` strings.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Q(pub Rational);

impl fmt::Display for Q {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format(&self.0))
    }
}

impl Serialize for Q {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format(&self.0))
    }
}

impl<'de> Deserialize<'de> for Q {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(i64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => parse(&s).map(Q).map_err(serde::de::Error::custom),
            Raw::Int(n) => Ok(Q(int(n))),
        }
    }
}

pub fn wrap_vec(v: &[Rational]) -> Vec<Q> {
    v.iter().cloned().map(Q).collect()
}

pub fn wrap_matrix(m: &[Vec<Rational>]) -> Vec<Vec<Q>> {
    m.iter().map(|row| wrap_vec(row)).collect()
}

pub fn unwrap_matrix(m: Vec<Vec<Q>>) -> Vec<Vec<Rational>> {
    m.into_iter()
        .map(|row| row.into_iter().map(|q| q.0).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(parse("3/4").unwrap(), ratio(3, 4));
        assert_eq!(parse(" 6/8 ").unwrap(), ratio(3, 4));
        assert_eq!(parse("-2").unwrap(), int(-2));
        assert_eq!(parse("1/-2").unwrap(), ratio(-1, 2));
        assert!(parse("1/0").is_err());
        assert!(parse("x").is_err());
        assert!(parse("").is_err());
    }

    #[test]
    fn format_is_canonical() {
        assert_eq!(format(&ratio(6, 8)), "3/4");
        assert_eq!(format(&ratio(4, 2)), "2");
        assert_eq!(format(&ratio(1, -3)), "-1/3");
    }

    #[test]
    fn serde_round_trip() {
        let q = Q(ratio(-7, 12));
        let s = serde_json::to_string(&q).unwrap();
        assert_eq!(s, "\"-7/12\"");
        let back: Q = serde_json::from_str(&s).unwrap();
        assert_eq!(back, q);
        let from_int: Q = serde_json::from_str("3").unwrap();
        assert_eq!(from_int.0, int(3));
    }
}
