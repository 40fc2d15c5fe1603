//! Independent reference computations for the integration tests.

#![allow(dead_code)]

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use specmix::arith::Rational;
use specmix::coin::{CoinLevel, CoinMeasure};

/// `sigma_hat(m)` by enumerating every pair of digit strings.
///
/// Each level `(C_t, A_t)` contributes `C_t (d_t - d'_t)` with `d_t, d'_t`
/// uniform in `0..A_t`. All phases are kept as integers over the common
/// denominator, so the only floating point step is one cosine per class.
pub struct PairOracle {
    den: i128,
    /// numerator of the phase mod `den` -> number of digit pairs
    histogram: BTreeMap<i128, u64>,
    total: u64,
}

impl PairOracle {
    pub fn new(levels: &[(Rational, u32)]) -> Self {
        let den = levels.iter().fold(BigInt::one(), |acc, (c, _)| acc.lcm(c.denom()));
        let den = den.to_i128().expect("oracle denominators fit i128");
        let nums: Vec<i128> = levels
            .iter()
            .map(|(c, _)| (c.numer() * (BigInt::from(den) / c.denom())).to_i128().unwrap())
            .collect();
        let mut histogram = BTreeMap::new();
        histogram.insert(0i128, 1u64);
        for ((_, a), num) in levels.iter().zip(&nums) {
            let mut next = BTreeMap::new();
            for (&phase, &count) in &histogram {
                for d1 in 0..*a as i128 {
                    for d2 in 0..*a as i128 {
                        let p = (phase + num * (d1 - d2)).rem_euclid(den);
                        *next.entry(p).or_insert(0) += count;
                    }
                }
            }
            histogram = next;
        }
        let total = levels.iter().map(|(_, a)| (*a as u64).pow(2)).product();
        PairOracle { den, histogram, total }
    }

    pub fn sigma(&self, m: i64) -> f64 {
        let mut acc = 0.0;
        for (&phase, &count) in &self.histogram {
            let r = (phase * m as i128).rem_euclid(self.den);
            acc += count as f64 * (std::f64::consts::TAU * r as f64 / self.den as f64).cos();
        }
        acc / self.total as f64
    }
}

/// Same quantity by walking the digit pairs one by one, no histogram. Only
/// for very small measures.
pub fn sigma_by_walk(levels: &[(Rational, u32)], m: i64) -> f64 {
    let mut sum = 0.0;
    let mut count = 0u64;
    let mut digits = vec![(0u32, 0u32); levels.len()];
    loop {
        let mut phase = Rational::zero();
        for ((c, _), (d1, d2)) in levels.iter().zip(&digits) {
            phase += c * Rational::from_integer(BigInt::from(*d1 as i64 - *d2 as i64));
        }
        let x = phase * Rational::from_integer(BigInt::from(m));
        let frac = &x - x.floor();
        let f = frac.numer().to_f64().unwrap() / frac.denom().to_f64().unwrap();
        sum += (std::f64::consts::TAU * f).cos();
        count += 1;
        let mut i = 0;
        loop {
            if i == levels.len() {
                return sum / count as f64;
            }
            let a = levels[i].1;
            digits[i].1 += 1;
            if digits[i].1 == a {
                digits[i].1 = 0;
                digits[i].0 += 1;
                if digits[i].0 == a {
                    digits[i].0 = 0;
                    i += 1;
                    continue;
                }
            }
            break;
        }
    }
}

/// A random finite measure: up to `max_levels` levels, alphabets in `2..=max_a`,
/// denominators in `2..=max_den`.
pub fn random_levels(rng: &mut impl Rng, max_levels: usize, max_a: u32, max_den: i64) -> Vec<(Rational, u32)> {
    let t = rng.gen_range(1..=max_levels);
    (0..t)
        .map(|_| {
            let q = rng.gen_range(2..=max_den);
            let p = rng.gen_range(1..q);
            (Rational::new(BigInt::from(p), BigInt::from(q)), rng.gen_range(2..=max_a))
        })
        .collect()
}

pub fn measure_of(levels: &[(Rational, u32)]) -> CoinMeasure {
    CoinMeasure::finite(levels.iter().map(|(c, a)| CoinLevel::new(c, *a).unwrap()).collect())
}
