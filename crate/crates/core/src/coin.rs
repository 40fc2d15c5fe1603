//! Coin measures: laws of `sum_t C_t * omega(t) mod 1` with independent
//! uniform digits `omega(t) in {0..A_t-1}`, and their Fourier coefficients.
//!
//! `rho_hat(m) = prod_t (1/A_t) sum_{r<A_t} e(m r C_t)` and
//! `sigma_hat(m) = |rho_hat(m)|^2`, the coefficients of the law of the
//! difference of two independent copies.
//!
//! Infinite products are truncated at a level chosen per call from a rigorous
//! bound: for `|theta| = ||m C_t||`, `|factor - 1| <= pi (A_t - 1) |m| ||C_t||`
//! (and trivially `<= 2`), and `|prod (1 + u_t) - 1| <= exp(sum |u_t|) - 1`.

use std::ops::RangeInclusive;

use num_bigint::BigInt;
use num_integer::Integer;
use num_complex::Complex64;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{
    dist_to_int, format_rational, parse_rational, phase_parts, ratio_to_f64, ratio_to_f64_upper, scale_residue, serde_rational,
    torus_reduce, Rational, TorusPoint,
};
use crate::report::{CorrelationRow, CorrelationTable};
use crate::sequences::SequenceFamily;
use crate::{Error, Result};

/// Float error charged per evaluated factor, in units of machine epsilon.
const FLOAT_ULPS_PER_FACTOR: f64 = 20.0;

/// Default cap on truncation depth, overridable with `SPECMIX_MAX_LEVELS`.
pub const DEFAULT_MAX_LEVELS: usize = 10_000;

pub fn max_levels() -> usize {
    std::env::var("SPECMIX_MAX_LEVELS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_LEVELS)
}

/// One digit distribution: frequency `C` and alphabet `{0..A-1}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawLevel", into = "RawLevel")]
pub struct CoinLevel {
    c: TorusPoint,
    a: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLevel {
    #[serde(rename = "C")]
    c: String,
    #[serde(rename = "A")]
    a: u32,
}

impl TryFrom<RawLevel> for CoinLevel {
    type Error = Error;
    fn try_from(raw: RawLevel) -> Result<Self> {
        CoinLevel::new(&parse_rational(&raw.c)?, raw.a)
    }
}

impl From<CoinLevel> for RawLevel {
    fn from(l: CoinLevel) -> Self {
        RawLevel { c: format_rational(l.c.value()), a: l.a }
    }
}

impl CoinLevel {
    /// Reduces `c` mod 1; the reduced value must be nonzero.
    pub fn new(c: &Rational, a: u32) -> Result<Self> {
        let c = torus_reduce(c);
        if c.is_zero() {
            return Err(Error::Validation("level frequency is 0 mod 1".into()));
        }
        if a < 2 {
            return Err(Error::Validation(format!("alphabet size {a} < 2")));
        }
        Ok(CoinLevel { c, a })
    }

    pub fn frequency(&self) -> &TorusPoint {
        &self.c
    }

    pub fn alphabet(&self) -> u32 {
        self.a
    }
}

/// Bound on the levels past the materialized ones: `B_{T+i} <= scale * ratio^i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TailBound {
    /// No levels beyond the materialized ones.
    Finite,
    Geometric {
        #[serde(with = "serde_rational")]
        ratio: Rational,
        #[serde(with = "serde_rational")]
        scale: Rational,
    },
    Unavailable,
}

impl TailBound {
    pub fn geometric(scale: Rational, ratio: Rational) -> Result<Self> {
        if scale.is_negative() || ratio.is_negative() || ratio >= Rational::one() {
            return Err(Error::Validation(format!(
                "geometric tail needs scale >= 0 and 0 <= ratio < 1, got {} and {}",
                format_rational(&scale),
                format_rational(&ratio)
            )));
        }
        Ok(TailBound::Geometric { ratio, scale })
    }

    /// Exact `sum_{i>=1} scale * ratio^i`.
    pub fn sum(&self) -> Option<Rational> {
        match self {
            TailBound::Finite => Some(Rational::zero()),
            TailBound::Geometric { ratio, scale } => Some(scale * ratio / (Rational::one() - ratio)),
            TailBound::Unavailable => None,
        }
    }
}

/// Materialized levels plus a tail descriptor. Immutable; safe to share.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure")]
pub struct CoinMeasure {
    levels: Vec<CoinLevel>,
    tail: TailBound,
    #[serde(skip_serializing)]
    tail_sum: Option<Rational>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasure {
    levels: Vec<CoinLevel>,
    tail: TailBound,
}

impl TryFrom<RawMeasure> for CoinMeasure {
    type Error = Error;
    fn try_from(raw: RawMeasure) -> Result<Self> {
        if let TailBound::Geometric { ratio, scale } = &raw.tail {
            TailBound::geometric(scale.clone(), ratio.clone())?;
        }
        Ok(CoinMeasure::assemble(raw.levels, raw.tail))
    }
}

/// A Fourier coefficient with a certified error radius: the true value lies
/// within `radius` of `value`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourierValue {
    pub value: Complex64,
    pub radius: f64,
}

impl FourierValue {
    pub fn exact(value: f64) -> Self {
        FourierValue { value: Complex64::new(value, 0.0), radius: 0.0 }
    }

    pub fn re(&self) -> f64 {
        self.value.re
    }
}

enum Factor {
    One,
    Zero,
    Value(Complex64),
}

/// `(1/A) sum_{r<A} e(r theta)` at `theta = num/den` with `0 <= num < den`,
/// exact 1 and exact 0 recognized from the integers.
fn digit_average(num: &BigInt, den: &BigInt, a: u32) -> Factor {
    if num.is_zero() {
        return Factor::One;
    }
    // centered representative in (-1/2, 1/2]
    let centered = if num * 2 > *den { num - den } else { num.clone() };
    let spread = &centered * a;
    if spread.mod_floor(den).is_zero() {
        return Factor::Zero;
    }
    let x = ratio_to_f64(&centered, den);
    let ratio = if x.abs() < 1e-30 {
        // sin(pi A x) / (A sin(pi x)) = 1 - pi^2 (A^2 - 1) x^2 / 6 + ..., and the
        // sines themselves may underflow
        1.0
    } else {
        sin_pi(&spread, den) / (a as f64 * sin_pi(&centered, den))
    };
    let two_den = den * 2;
    let half_turns = (&centered * (a - 1)).mod_floor(&two_den);
    Factor::Value(phase_parts(&half_turns, &two_den) * ratio)
}

/// `sin(pi num/den)` with the argument reduced exactly to `[-1/2, 1/2]` first.
fn sin_pi(num: &BigInt, den: &BigInt) -> f64 {
    let two_den = den * 2;
    // r in [-den, den)
    let mut r = (num + den).mod_floor(&two_den) - den;
    if &r * 2 > *den {
        r = den - r;
    } else if &r * 2 < -den {
        r = -den - r;
    }
    (std::f64::consts::PI * ratio_to_f64(&r, den)).sin()
}

/// `(1/A) sum_{r<A} e(m r C)`.
pub fn level_factor(level: &CoinLevel, m: &BigInt) -> Complex64 {
    let c = level.c.value();
    match digit_average(&scale_residue(m, c), c.denom(), level.a) {
        Factor::One => Complex64::new(1.0, 0.0),
        Factor::Zero => Complex64::new(0.0, 0.0),
        Factor::Value(z) => z,
    }
}

/// `|(1/A) sum_{r<A} e(r theta)|^2` for a point of the circle.
pub fn digit_average_power(theta: &TorusPoint, a: u32) -> f64 {
    match digit_average(theta.value().numer(), theta.value().denom(), a) {
        Factor::One => 1.0,
        Factor::Zero => 0.0,
        Factor::Value(z) => z.norm_sqr(),
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps.is_finite() && eps > 0.0 {
        Ok(())
    } else {
        Err(Error::Validation(format!("eps must be positive, got {eps}")))
    }
}

impl CoinMeasure {
    fn assemble(levels: Vec<CoinLevel>, tail: TailBound) -> Self {
        let tail_sum = tail.sum();
        CoinMeasure { levels, tail, tail_sum }
    }

    pub fn new(levels: Vec<CoinLevel>, tail: TailBound) -> Result<Self> {
        if let TailBound::Geometric { ratio, scale } = &tail {
            TailBound::geometric(scale.clone(), ratio.clone())?;
        }
        Ok(CoinMeasure::assemble(levels, tail))
    }

    /// The Dirac mass at 0.
    pub fn empty() -> Self {
        CoinMeasure::assemble(Vec::new(), TailBound::Finite)
    }

    /// Finitely many levels, nothing beyond.
    pub fn finite(levels: Vec<CoinLevel>) -> Self {
        CoinMeasure::assemble(levels, TailBound::Finite)
    }

    /// Convenience: `[(C, A), ...]` with a finite tail.
    pub fn from_pairs(pairs: &[(Rational, u32)]) -> Result<Self> {
        let levels = pairs.iter().map(|(c, a)| CoinLevel::new(c, *a)).collect::<Result<Vec<_>>>()?;
        Ok(Self::finite(levels))
    }

    pub fn levels(&self) -> &[CoinLevel] {
        &self.levels
    }

    pub fn tail(&self) -> &TailBound {
        &self.tail
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// The first `t` levels as a finite measure.
    pub fn truncated(&self, t: usize) -> Self {
        Self::finite(self.levels[..t.min(self.len())].to_vec())
    }

    fn tail_alphabet(&self) -> u32 {
        self.levels.iter().map(|l| l.a).max().unwrap_or(2)
    }

    /// Bound on `sum_{t > T} |factor_t - 1|` for `t` past the materialized levels.
    fn descriptor_tail(&self, m_abs: &BigInt) -> Option<f64> {
        let sum = self.tail_sum.as_ref()?;
        if sum.is_zero() {
            return Some(0.0);
        }
        let weight = std::f64::consts::PI * (self.tail_alphabet() - 1) as f64;
        let x = ratio_to_f64_upper(&(m_abs * sum.numer()), sum.denom());
        Some(weight * x * (1.0 + 4.0 * f64::EPSILON))
    }

    /// `rho_hat(m)` to within `eps`.
    pub fn fourier_rho(&self, m: &BigInt, eps: f64) -> Result<FourierValue> {
        check_eps(eps)?;
        if m.is_zero() {
            return Ok(FourierValue::exact(1.0));
        }
        let m_abs = m.abs();
        let phases: Vec<BigInt> = self.levels.iter().map(|l| scale_residue(m, l.c.value())).collect();
        let exact_zero = || {
            phases
                .iter()
                .zip(&self.levels)
                .any(|(r, l)| matches!(digit_average(r, l.c.value().denom(), l.a), Factor::Zero))
        };
        let Some(tail) = self.descriptor_tail(&m_abs) else {
            if exact_zero() {
                return Ok(FourierValue::exact(0.0));
            }
            return Err(Error::TailBoundUnavailable);
        };
        // suffix[t] bounds the total deviation of levels t+1.. (0-based t levels kept)
        let mut suffix = vec![0.0f64; self.len() + 1];
        suffix[self.len()] = tail;
        for t in (0..self.len()).rev() {
            let l = &self.levels[t];
            let weight = std::f64::consts::PI * (l.a - 1) as f64;
            let (p, q) = (l.c.value().numer(), l.c.value().denom());
            let near = if p * 2 > *q { q - p } else { p.clone() };
            let dist = ratio_to_f64_upper(&(near * &m_abs), q);
            let term = (weight * dist * (1.0 + 4.0 * f64::EPSILON)).min(2.0);
            suffix[t] = suffix[t + 1] + term;
        }
        let budget = eps / 2.0;
        let Some(keep) = (0..=self.len()).find(|&t| suffix[t].exp_m1() <= budget) else {
            if exact_zero() {
                return Ok(FourierValue::exact(0.0));
            }
            return Err(Error::TruncationInfeasible {
                required: format!("more than {}", self.len()),
                limit: max_levels(),
            });
        };
        if keep > max_levels() {
            return Err(Error::TruncationInfeasible { required: keep.to_string(), limit: max_levels() });
        }
        let mut value = Complex64::new(1.0, 0.0);
        let mut evaluated = 0usize;
        for (r, l) in phases.iter().zip(&self.levels).take(keep) {
            match digit_average(r, l.c.value().denom(), l.a) {
                Factor::One => {}
                Factor::Zero => return Ok(FourierValue::exact(0.0)),
                Factor::Value(z) => {
                    value *= z;
                    evaluated += 1;
                }
            }
        }
        let truncation = suffix[keep].exp_m1() * (1.0 + 4.0 * f64::EPSILON);
        let float = evaluated as f64 * FLOAT_ULPS_PER_FACTOR * f64::EPSILON;
        Ok(FourierValue { value, radius: truncation + float })
    }

    /// `sigma_hat(m) = |rho_hat(m)|^2` to within `eps` (real).
    pub fn fourier_sigma(&self, m: &BigInt, eps: f64) -> Result<FourierValue> {
        check_eps(eps)?;
        let rho = self.fourier_rho(m, eps / 3.0)?;
        if rho.radius == 0.0 && (rho.value.norm_sqr() == 0.0 || rho.value == Complex64::new(1.0, 0.0)) {
            return Ok(FourierValue::exact(rho.value.norm_sqr()));
        }
        let modulus = rho.value.norm();
        let value = rho.value.norm_sqr();
        let radius = (2.0 * modulus + rho.radius) * rho.radius + 4.0 * f64::EPSILON * value;
        Ok(FourierValue { value: Complex64::new(value, 0.0), radius })
    }

    /// `e_{j,k,m} = |sigma_hat(phi_j(n_k) + m) - (1 - xi_j) sigma_hat(m)|` over
    /// `j <= N`, `k <= K`, `m` in `m_range`. Rows come out ordered by `(j, k, m)`.
    pub fn verify_profile(
        &self,
        family: &SequenceFamily,
        anchor: &[BigInt],
        xi: &[bool],
        k_max: usize,
        m_range: RangeInclusive<i64>,
        eps: f64,
    ) -> Result<CorrelationTable> {
        if xi.len() != family.len() {
            return Err(Error::Validation(format!(
                "profile has {} entries, family has {}",
                xi.len(),
                family.len()
            )));
        }
        if anchor.len() < k_max {
            return Err(Error::Validation(format!("anchor has {} entries, need {k_max}", anchor.len())));
        }
        let ms: Vec<i64> = m_range.collect();
        let base: Vec<FourierValue> = ms
            .par_iter()
            .map(|&m| self.fourier_sigma(&BigInt::from(m), eps))
            .collect::<Result<_>>()?;
        let mut cells = Vec::new();
        for j in 1..=family.len() {
            for (k, n_k) in anchor.iter().enumerate().take(k_max) {
                let shift = family.eval_member(j, n_k)?;
                for (i, &m) in ms.iter().enumerate() {
                    cells.push((j, k + 1, i, m, &shift + m));
                }
            }
        }
        let rows = cells
            .par_iter()
            .map(|(j, k, i, m, arg)| {
                let shifted = self.fourier_sigma(arg, eps)?;
                let rigid = !xi[j - 1];
                let (target, target_radius) = if rigid { (base[*i].re(), base[*i].radius) } else { (0.0, 0.0) };
                Ok(CorrelationRow {
                    j: *j,
                    k: *k,
                    m: *m,
                    sigma_shifted: shifted.re(),
                    sigma_target: target,
                    error: (shifted.re() - target).abs(),
                    radius: shifted.radius + target_radius,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CorrelationTable { rows })
    }

    /// `(1/(2M+1)) sum_{|m|<=M} sigma_hat(m)^2`.
    pub fn wiener_average(&self, big_m: u64, eps: f64) -> Result<f64> {
        let m = big_m as i64;
        let terms: Vec<f64> = (-m..=m)
            .into_par_iter()
            .map(|k| self.fourier_sigma(&BigInt::from(k), eps).map(|v| v.re() * v.re()))
            .collect::<Result<_>>()?;
        Ok(terms.iter().sum::<f64>() / (2 * big_m + 1) as f64)
    }

    /// Upper bound on `sum_{t > t0} ||C_t||` over all levels (materialized and tail).
    pub fn frequency_tail(&self, t0: usize) -> Option<Rational> {
        let mut total = self.tail.sum()?;
        for l in self.levels.iter().skip(t0) {
            total += dist_to_int(l.c.value());
        }
        Some(total)
    }
}
