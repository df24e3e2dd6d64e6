//! Exact scalars over ℚ together with the absolute value of a chosen place.
//!
//! Every quantity that downstream code compares is a rational number; square
//! roots are never evaluated, only compared exactly or bounded.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Rat = BigRational;

/// Which absolute value is in force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Place {
    Archimedean,
    PAdic(u64),
}

impl Place {
    pub fn padic(p: u64) -> Result<Place> {
        if is_prime(p) {
            Ok(Place::PAdic(p))
        } else {
            Err(Error::NotPrime(p))
        }
    }

    pub fn is_archimedean(&self) -> bool {
        matches!(self, Place::Archimedean)
    }

    pub fn prime(&self) -> Option<u64> {
        match self {
            Place::Archimedean => None,
            Place::PAdic(p) => Some(*p),
        }
    }
}

impl fmt::Display for Place {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Place::Archimedean => write!(f, "arch"),
            Place::PAdic(p) => write!(f, "p:{p}"),
        }
    }
}

impl Serialize for Place {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Place {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Place, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Rationals as `"p/q"` strings.
pub mod rat_serde {
    use super::{fmt_rat, parse_rat, Rat};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &Rat, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_rat(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        parse_rat(&String::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// Vectors of rationals as string arrays.
pub mod rat_vec_serde {
    use super::{fmt_rat, parse_rat, Rat};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rat], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(fmt_rat).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rat>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|x| parse_rat(x).map_err(serde::de::Error::custom))
            .collect()
    }
}

impl FromStr for Place {
    type Err = Error;

    fn from_str(s: &str) -> Result<Place> {
        let s = s.trim();
        if s == "arch" || s == "archimedean" {
            return Ok(Place::Archimedean);
        }
        let digits = s
            .strip_prefix("p:")
            .ok_or_else(|| Error::Invalid(format!("unknown place `{s}`")))?;
        let p: u64 = digits
            .parse()
            .map_err(|_| Error::Invalid(format!("bad prime `{digits}`")))?;
        Place::padic(p)
    }
}

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Parses `n` or `n/d` with arbitrary-precision integers.
pub fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    let bad = || Error::Invalid(format!("malformed rational `{s}`"));
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(Error::Invalid(format!("zero denominator in `{s}`")));
    }
    Ok(Rat::new(n, d))
}

pub fn fmt_rat(q: &Rat) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

fn int_valuation(n: &BigInt, p: &BigInt) -> i64 {
    let mut v = 0;
    let mut m = n.clone();
    loop {
        let (q, r) = m.div_rem(p);
        if !r.is_zero() {
            return v;
        }
        m = q;
        v += 1;
    }
}

/// `v` with `x = p^v · a/b`, `p ∤ a`, `p ∤ b`.
pub fn padic_valuation(x: &Rat, p: u64) -> Result<i64> {
    if x.is_zero() {
        return Err(Error::ValuationOfZero);
    }
    let p = BigInt::from(p);
    Ok(int_valuation(x.numer(), &p) - int_valuation(x.denom(), &p))
}

/// `p^e` as a rational, for any sign of `e`.
pub fn pow_p(p: u64, e: i64) -> Rat {
    let base = BigInt::from(p).pow(e.unsigned_abs() as u32);
    if e >= 0 {
        Rat::from_integer(base)
    } else {
        Rat::new(BigInt::one(), base)
    }
}

pub fn abs_value(x: &Rat, place: Place) -> Rat {
    if x.is_zero() {
        return Rat::zero();
    }
    match place {
        Place::Archimedean => x.abs(),
        Place::PAdic(p) => pow_p(p, -padic_valuation(x, p).expect("nonzero")),
    }
}

/// `|x|²`, always rational.
pub fn abs_sq(x: &Rat, place: Place) -> Rat {
    let a = abs_value(x, place);
    &a * &a
}

/// Rational bounds `lo ≤ √q ≤ hi` whose width is at most `2^-bits`
/// relative to `max(√q, 2^-bits)`.
pub fn sqrt_bounds(q: &Rat, bits: u32) -> (Rat, Rat) {
    assert!(!q.is_negative(), "square root of a negative rational");
    if q.is_zero() {
        return (Rat::zero(), Rat::zero());
    }
    let a = q.numer();
    let b = q.denom();
    // √(a/b) = √(ab)/b; choose a scale so that the integer square root
    // carries enough significant bits even for tiny q.
    let deficit = (b.bits() as i64 - a.bits() as i64).max(0) as u32;
    let s = bits + deficit / 2 + 2;
    let scaled = (a * b) << (2 * s as usize);
    let m = scaled.sqrt();
    let denom = b << (s as usize);
    let lo = Rat::new(m.clone(), denom.clone());
    let hi = if &m * &m == scaled {
        lo.clone()
    } else {
        Rat::new(m + 1, denom)
    };
    (lo, hi)
}

pub fn sqrt_lower(q: &Rat) -> Rat {
    sqrt_bounds(q, 48).0
}

pub fn sqrt_upper(q: &Rat) -> Rat {
    sqrt_bounds(q, 48).1
}

/// Exact test of `√a + √b ≤ √c` for nonnegative rationals.
pub fn sqrt_sum_le(a: &Rat, b: &Rat, c: &Rat) -> bool {
    let slack = c - a - b;
    if slack.is_negative() {
        return false;
    }
    let four_ab = a * b * int(4);
    four_ab <= &slack * &slack
}

/// Exact test of `√a + √b < √c` for nonnegative rationals.
pub fn sqrt_sum_lt(a: &Rat, b: &Rat, c: &Rat) -> bool {
    let slack = c - a - b;
    if !slack.is_positive() {
        return false;
    }
    let four_ab = a * b * int(4);
    four_ab < &slack * &slack
}

/// Exact test of `|√a − √b| ≤ √c` for nonnegative rationals.
pub fn sqrt_diff_le(a: &Rat, b: &Rat, c: &Rat) -> bool {
    // |√a − √b| ≤ √c  ⟺  √max ≤ √min + √c
    let (big, small) = if a >= b { (a, b) } else { (b, a) };
    // √big ≤ √small + √c  ⟺  big − small − c ≤ 2√(small·c)
    let slack = big - small - c;
    !slack.is_positive() || &slack * &slack <= small * c * int(4)
}

/// Rounds `q` to a dyadic rational with `bits` fractional bits (toward zero).
pub fn round_dyadic(q: &Rat, bits: u32) -> Rat {
    let scale = BigInt::one() << (bits as usize);
    let n = (q.numer() * &scale).div_floor(q.denom());
    Rat::new(n, scale)
}

/// Rounds a positive rational up to one with about `bits` significant bits.
pub fn round_up_sig(q: &Rat, bits: u32) -> Rat {
    if !q.is_positive() {
        return q.clone();
    }
    let shift = bits as i64 - (q.numer().bits() as i64 - q.denom().bits() as i64);
    let scaled = if shift >= 0 {
        q * Rat::from_integer(BigInt::one() << shift as usize)
    } else {
        q / Rat::from_integer(BigInt::one() << (-shift) as usize)
    };
    let up = Rat::from_integer(scaled.ceil().to_integer());
    if shift >= 0 {
        up / Rat::from_integer(BigInt::one() << shift as usize)
    } else {
        up * Rat::from_integer(BigInt::one() << (-shift) as usize)
    }
}

/// Rounds a positive rational down to one with about `bits` significant bits.
pub fn round_down_sig(q: &Rat, bits: u32) -> Rat {
    if !q.is_positive() {
        return q.clone();
    }
    let shift = bits as i64 - (q.numer().bits() as i64 - q.denom().bits() as i64);
    let scale = |x: Rat, up: bool| {
        let f = Rat::from_integer(BigInt::one() << shift.unsigned_abs() as usize);
        if (shift >= 0) == up {
            x * f
        } else {
            x / f
        }
    };
    let down = Rat::from_integer(scale(q.clone(), true).floor().to_integer());
    scale(down, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valuation_examples() {
        assert_eq!(padic_valuation(&int(50), 5).unwrap(), 2);
        assert_eq!(padic_valuation(&int(1), 7).unwrap(), 0);
        assert_eq!(padic_valuation(&rat(3, 49), 7).unwrap(), -2);
        assert_eq!(padic_valuation(&int(0), 7), Err(Error::ValuationOfZero));
        assert_eq!(
            Error::ValuationOfZero.to_string(),
            "valuation of zero undefined"
        );
    }

    #[test]
    fn significant_bit_rounding() {
        let q = rat(1, 3);
        let up = round_up_sig(&q, 20);
        let down = round_down_sig(&q, 20);
        assert!(down < q && q < up);
        assert!(&up - &down < rat(1, 1 << 20));
        let tiny = rat(1, 3) * rat(1, 1 << 40) * rat(1, 1 << 20);
        let up = round_up_sig(&tiny, 20);
        assert!(up > tiny && (&up - &tiny) / &tiny < rat(1, 1 << 18));
        assert_eq!(round_up_sig(&int(8), 10), int(8));
    }

    #[test]
    fn abs_value_examples() {
        assert_eq!(abs_value(&rat(-3, 2), Place::Archimedean), rat(3, 2));
        assert_eq!(abs_value(&int(50), Place::PAdic(5)), rat(1, 25));
        assert_eq!(abs_value(&int(0), Place::PAdic(5)), int(0));
        assert_eq!(abs_value(&int(0), Place::Archimedean), int(0));
    }

    #[test]
    fn place_parsing() {
        assert_eq!("arch".parse::<Place>().unwrap(), Place::Archimedean);
        assert_eq!("p:7".parse::<Place>().unwrap(), Place::PAdic(7));
        assert_eq!("p:6".parse::<Place>(), Err(Error::NotPrime(6)));
        assert!("q:5".parse::<Place>().is_err());
    }

    #[test]
    fn rat_parsing() {
        assert_eq!(parse_rat("-3/6").unwrap(), rat(-1, 2));
        assert_eq!(parse_rat("7").unwrap(), int(7));
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("x").is_err());
        assert_eq!(fmt_rat(&rat(6, 4)), "3/2");
    }

    #[test]
    fn sqrt_bounds_bracket() {
        for q in [
            rat(2, 1),
            rat(1, 3),
            rat(1, 1 << 40),
            rat(10_000, 7),
            rat(9, 4),
        ] {
            let (lo, hi) = sqrt_bounds(&q, 40);
            assert!(&lo * &lo <= q && q <= &hi * &hi);
            let width = &hi - &lo;
            assert!(width <= &hi * rat(1, 1 << 39) || width <= rat(1, 1 << 40));
        }
        let (lo, hi) = sqrt_bounds(&rat(9, 4), 40);
        assert_eq!(lo, rat(3, 2));
        assert_eq!(hi, rat(3, 2));
    }

    #[test]
    fn exact_root_sums() {
        // √(1/4) + √(1/4) = √1
        assert!(sqrt_sum_le(&rat(1, 4), &rat(1, 4), &int(1)));
        assert!(!sqrt_sum_lt(&rat(1, 4), &rat(1, 4), &int(1)));
        // √2 + √3 ≈ 3.146 < √10 ≈ 3.162
        assert!(sqrt_sum_lt(&int(2), &int(3), &int(10)));
        assert!(!sqrt_sum_le(&int(2), &int(3), &int(9)));
        assert!(sqrt_diff_le(&int(4), &int(1), &int(1)));
        assert!(!sqrt_diff_le(&int(9), &int(1), &int(3)));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn small_rat() -> impl Strategy<Value = Rat> {
            (-400i64..400, 1i64..400).prop_map(|(n, d)| rat(n, d))
        }

        proptest! {
            #[test]
            fn multiplicative(x in small_rat(), y in small_rat(), p in prop::sample::select(vec![2u64, 3, 5, 7])) {
                for place in [Place::Archimedean, Place::PAdic(p)] {
                    prop_assert_eq!(abs_value(&(&x * &y), place), abs_value(&x, place) * abs_value(&y, place));
                }
            }

            #[test]
            fn ultrametric(x in small_rat(), y in small_rat(), p in prop::sample::select(vec![2u64, 3, 5, 7])) {
                let place = Place::PAdic(p);
                let lhs = abs_value(&(&x + &y), place);
                let rhs = abs_value(&x, place).max(abs_value(&y, place));
                prop_assert!(lhs <= rhs);
            }

            #[test]
            fn canonical_form(x in small_rat(), y in small_rat()) {
                for q in [&x * &y, &x + &y, abs_value(&x, Place::PAdic(3))] {
                    prop_assert!(q.denom().is_positive());
                    prop_assert!(q.numer().gcd(q.denom()).is_one());
                }
            }
        }
    }
}
