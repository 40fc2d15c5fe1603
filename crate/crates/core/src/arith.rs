//! Exact rational arithmetic on the circle `T = R/Z`.
//!
//! Everything in this crate is computed with arbitrary-precision rationals.
//! The only place a floating point number is produced from an exact value is
//! [`unit_phase`] (and the bound/diagnostic conversions in [`to_f64`]), so the
//! floating point error analysis of the Fourier engine lives in one spot.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::Error;

/// Exact fraction `p/q` with `q > 0`, always stored reduced.
pub type Rational = BigRational;

/// A point of the circle, represented by its unique representative in `[0, 1)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TorusPoint(Rational);

impl TorusPoint {
    pub fn zero() -> Self {
        TorusPoint(Rational::zero())
    }

    pub fn value(&self) -> &Rational {
        &self.0
    }

    pub fn into_value(self) -> Rational {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Representative in `(-1/2, 1/2]`.
    pub fn centered(&self) -> Rational {
        if self.0 > half() {
            &self.0 - Rational::one()
        } else {
            self.0.clone()
        }
    }
}

impl fmt::Display for TorusPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(&self.0))
    }
}

pub(crate) fn half() -> Rational {
    Rational::new(BigInt::one(), BigInt::from(2))
}

/// `x - floor(x)`.
pub fn torus_reduce(x: &Rational) -> TorusPoint {
    TorusPoint(x - x.floor())
}

/// `(m * c) mod 1` without ever forming `m * c`.
///
/// With `c = p/q` reduced this is `((m mod q) * p mod q) / q`, so the cost is
/// governed by the sizes of `q` and `p`, not by the magnitude of `m`.
pub fn torus_scale(m: &BigInt, c: &Rational) -> TorusPoint {
    let num = scale_residue(m, c);
    if num.is_zero() {
        return TorusPoint::zero();
    }
    TorusPoint(Rational::new(num, c.denom().clone()))
}

/// The numerator of `torus_scale(m, c)` over the denominator of `c`, unreduced.
pub(crate) fn scale_residue(m: &BigInt, c: &Rational) -> BigInt {
    let q = c.denom();
    let residue = m.mod_floor(q);
    if residue.is_zero() {
        return residue;
    }
    (residue * c.numer()).mod_floor(q)
}

/// Distance from `x` to the nearest integer, `||x||`.
pub fn dist_to_int(x: &Rational) -> Rational {
    let frac = torus_reduce(x).into_value();
    let other = Rational::one() - &frac;
    if frac <= other {
        frac
    } else {
        other
    }
}

/// `exp(2 pi i x)`.
///
/// The exact point is split into a quarter turn and a remainder in `[0, 1/4)`
/// before conversion, so quarter points come out exact and the trig argument
/// never exceeds `pi/4`.
pub fn unit_phase(x: &TorusPoint) -> Complex64 {
    phase_parts(x.value().numer(), x.value().denom())
}

/// `exp(2 pi i num/den)` for `0 <= num < den`; the fraction need not be reduced.
pub(crate) fn phase_parts(num: &BigInt, den: &BigInt) -> Complex64 {
    let four_den: BigInt = den * 4;
    let scaled: BigInt = num * 4;
    let (quarter, rem) = scaled.div_mod_floor(den);
    let turns = quarter.to_u8().unwrap_or(0) & 3;
    // fold [1/8, 1/4) onto (0, 1/8] so small components keep relative accuracy
    let (s, c) = if rem.is_zero() {
        (0.0, 1.0)
    } else if &rem * 2 > *den {
        let co = den - &rem;
        let (s, c) = (std::f64::consts::TAU * ratio_to_f64(&co, &four_den)).sin_cos();
        (c, s)
    } else {
        (std::f64::consts::TAU * ratio_to_f64(&rem, &four_den)).sin_cos()
    };
    match turns {
        0 => Complex64::new(c, s),
        1 => Complex64::new(-s, c),
        2 => Complex64::new(-c, -s),
        _ => Complex64::new(s, -c),
    }
}

/// Nearest-ish `f64` to an exact rational (error below one ulp, no overflow
/// for huge numerators and denominators).
pub fn to_f64(x: &Rational) -> f64 {
    ratio_to_f64(x.numer(), x.denom())
}

/// `num / den` as an `f64` without reducing the fraction first.
pub(crate) fn ratio_to_f64(num: &BigInt, den: &BigInt) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let neg = num.is_negative() != den.is_negative();
    let p = num.magnitude();
    let q = den.magnitude();
    let shift = 66 + q.bits() as i64 - p.bits() as i64;
    let quotient: BigUint = if shift >= 0 {
        (p << shift as u64) / q
    } else {
        p / (q << (-shift) as u64)
    };
    let mantissa = quotient.to_f64().unwrap_or(f64::INFINITY);
    let value = ldexp(mantissa, -shift);
    if neg {
        -value
    } else {
        value
    }
}

/// Upper bound companion of `ratio_to_f64` for nonnegative fractions.
pub(crate) fn ratio_to_f64_upper(num: &BigInt, den: &BigInt) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let bumped = ratio_to_f64(num, den) * (1.0 + 4.0 * f64::EPSILON);
    if bumped == 0.0 {
        f64::MIN_POSITIVE
    } else {
        bumped
    }
}

/// An `f64` that is guaranteed not to be below the exact (nonnegative) value.
pub fn to_f64_upper(x: &Rational) -> f64 {
    let v = to_f64(x);
    if x.is_zero() {
        return 0.0;
    }
    let bumped = v * (1.0 + 4.0 * f64::EPSILON);
    if bumped == 0.0 {
        f64::MIN_POSITIVE
    } else {
        bumped
    }
}

fn ldexp(mut x: f64, mut e: i64) -> f64 {
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
        if x.is_infinite() {
            return x;
        }
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
        if x == 0.0 {
            return x;
        }
    }
    x * 2f64.powi(e as i32)
}

pub fn rat(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Canonical `"p/q"` text form (integers keep the `/1`).
pub fn format_rational(x: &Rational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Accepts `"p/q"`, `"p"` or `"-p/q"`; rejects zero denominators.
pub fn parse_rational(s: &str) -> Result<Rational, Error> {
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p = BigInt::from_str(p.trim()).map_err(|_| bad())?;
            let q = BigInt::from_str(q.trim()).map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(Rational::new(p, q))
        }
        None => Ok(Rational::from_integer(BigInt::from_str(s).map_err(|_| bad())?)),
    }
}

/// `serde(with = ...)` adapters: rationals as `"p/q"`, big integers as decimal strings.
pub mod serde_rational {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let text = String::deserialize(d)?;
        parse_rational(&text).map_err(serde::de::Error::custom)
    }
}

pub mod serde_rational_vec {
    use super::*;

    pub fn serialize<S: Serializer>(xs: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<String> = xs.iter().map(format_rational).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter()
            .map(|t| parse_rational(t).map_err(serde::de::Error::custom))
            .collect()
    }
}

pub mod serde_bigint {
    use super::*;

    pub fn serialize<S: Serializer>(x: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&x.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        let v = IntRepr::deserialize(d)?;
        v.to_bigint().map_err(serde::de::Error::custom)
    }
}

pub mod serde_bigint_vec {
    use super::*;

    pub fn serialize<S: Serializer>(xs: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<String> = xs.iter().map(|x| x.to_string()).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigInt>, D::Error> {
        let v = Vec::<IntRepr>::deserialize(d)?;
        v.iter()
            .map(|t| t.to_bigint().map_err(serde::de::Error::custom))
            .collect()
    }
}

pub mod serde_bigint_opt {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Option<BigInt>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(v) => s.serialize_str(&v.to_string()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BigInt>, D::Error> {
        let v = Option::<IntRepr>::deserialize(d)?;
        v.map(|t| t.to_bigint().map_err(serde::de::Error::custom)).transpose()
    }
}

pub mod serde_bigint_opt_vec {
    use super::*;

    pub fn serialize<S: Serializer>(xs: &Option<Vec<BigInt>>, s: S) -> Result<S::Ok, S::Error> {
        match xs {
            Some(v) => serde_bigint_vec::serialize(v, s),
            None => s.serialize_none(),
        }
    }
}

/// An integer in config JSON: either a plain number or a decimal string.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(untagged)]
pub enum IntRepr {
    Num(i64),
    Text(String),
}

impl IntRepr {
    pub fn to_bigint(&self) -> Result<BigInt, Error> {
        match self {
            IntRepr::Num(n) => Ok(BigInt::from(*n)),
            IntRepr::Text(t) => BigInt::from_str(t.trim())
                .map_err(|_| Error::Parse(format!("not an integer: {t:?}"))),
        }
    }
}

impl From<&BigInt> for IntRepr {
    fn from(x: &BigInt) -> Self {
        match x.to_i64() {
            Some(n) => IntRepr::Num(n),
            None => IntRepr::Text(x.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() <= 4.0 * f64::EPSILON
    }

    #[test]
    fn reduce_examples() {
        assert_eq!(torus_reduce(&rat(7, 2)).value(), &rat(1, 2));
        assert_eq!(torus_reduce(&rat(-1, 3)).value(), &rat(2, 3));
        assert!(torus_reduce(&int(0)).is_zero());
    }

    #[test]
    fn scale_examples() {
        let m = BigInt::from(1_000_001);
        assert_eq!(torus_scale(&m, &rat(1, 3)).value(), &rat(2, 3));
        // direct route on the same small numbers
        assert_eq!(torus_reduce(&(Rational::from_integer(m) * rat(1, 3))).value(), &rat(2, 3));
        assert!(torus_scale(&BigInt::zero(), &rat(7, 11)).is_zero());
        assert!(torus_scale(&BigInt::from(4), &rat(1, 2)).is_zero());
        assert_eq!(torus_scale(&BigInt::from(-1), &rat(1, 3)).value(), &rat(2, 3));
    }

    #[test]
    fn dist_examples() {
        assert_eq!(dist_to_int(&rat(3, 5)), rat(2, 5));
        assert_eq!(dist_to_int(&rat(7, 2)), rat(1, 2));
        assert_eq!(dist_to_int(&rat(-1, 3)), rat(1, 3));
    }

    #[test]
    fn phase_examples() {
        assert_eq!(unit_phase(&TorusPoint::zero()), Complex64::new(1.0, 0.0));
        assert_eq!(unit_phase(&torus_reduce(&rat(1, 2))), Complex64::new(-1.0, 0.0));
        assert_eq!(unit_phase(&torus_reduce(&rat(1, 4))), Complex64::new(0.0, 1.0));
        assert_eq!(unit_phase(&torus_reduce(&rat(3, 4))), Complex64::new(0.0, -1.0));
        let x = torus_reduce(&rat(1, 3));
        let expect = Complex64::new(-0.5, 3f64.sqrt() / 2.0);
        assert!(close(unit_phase(&x), expect));
    }

    #[test]
    fn phase_of_tiny_and_near_one() {
        let big = BigInt::from(10).pow(300);
        let tiny = Rational::new(BigInt::one(), big.clone());
        let z = unit_phase(&torus_reduce(&tiny));
        assert_eq!(z.re, 1.0);
        assert!((z.im / (std::f64::consts::TAU * 1e-300) - 1.0).abs() < 1e-14);
        let near_one = Rational::new(&big - 1, big);
        let w = unit_phase(&torus_reduce(&near_one));
        assert!((w.im / (-std::f64::consts::TAU * 1e-300) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn f64_conversion_handles_huge_parts() {
        let a = BigInt::from(3) * BigInt::from(10).pow(5000);
        let b = BigInt::from(4) * BigInt::from(10).pow(5000);
        assert_eq!(to_f64(&Rational::new(a, b)), 0.75);
        assert_eq!(to_f64(&rat(-1, 3)), -1.0 / 3.0);
        assert!(to_f64_upper(&rat(1, 3)) >= 1.0 / 3.0);
    }

    #[test]
    fn text_round_trip() {
        assert_eq!(format_rational(&int(0)), "0/1");
        assert_eq!(parse_rational("-6/4").unwrap(), rat(-3, 2));
        assert_eq!(parse_rational("5").unwrap(), int(5));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    fn arb_rational() -> impl Strategy<Value = Rational> {
        (any::<i64>(), 1i64..i64::MAX).prop_map(|(p, q)| rat(p, q))
    }

    proptest! {
        #[test]
        fn reduce_is_translation_invariant(x in arb_rational(), n in any::<i64>()) {
            let shifted = &x + int(n);
            prop_assert_eq!(torus_reduce(&shifted), torus_reduce(&x));
        }

        #[test]
        fn scale_matches_full_product(m in any::<i128>(), x in arb_rational()) {
            let m = BigInt::from(m);
            let full = torus_reduce(&(Rational::from_integer(m.clone()) * &x));
            prop_assert_eq!(torus_scale(&m, &x), full);
        }

        #[test]
        fn dist_is_symmetric(x in arb_rational()) {
            let d = dist_to_int(&x);
            prop_assert!(d >= int(0) && d <= rat(1, 2));
            let mirrored = Rational::one() - torus_reduce(&x).into_value();
            prop_assert_eq!(dist_to_int(&mirrored), d);
        }

        #[test]
        fn phase_matches_libm(p in 0i64..1_000_000, q in 1i64..1_000_000) {
            let x = torus_reduce(&rat(p, q));
            let f = to_f64(x.value()) * std::f64::consts::TAU;
            let z = unit_phase(&x);
            prop_assert!((z - Complex64::new(f.cos(), f.sin())).norm() < 1e-9);
            prop_assert!((z.norm() - 1.0).abs() <= 4.0 * f64::EPSILON);
        }
    }
}
