//! The prime-product construction: families `phi_j(n) = q_j n` built from
//! distinct primes attached to the nonempty proper subsets of `{1..N}`, the
//! anchor `n_k = P^{2k} k!`, and coin measures with alphabet `max(p-1, 1) + 1`.
//!
//! Subsets are numbered by bitmask: for `1 <= n <= 2^N - 2`, `A_n` contains
//! `j` iff bit `j-1` of `n` is set. Index `0` stands for the full set (prime
//! `1`) and index `2^N - 1` for the empty set (prime `M`).

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{serde_bigint, serde_bigint_vec, torus_reduce, torus_scale, Rational};
use crate::coin::{digit_average_power, CoinLevel, CoinMeasure, TailBound};
use crate::poly::{AnchorSequence, Certificate};
use crate::sequences::{IntPolynomial, SequenceFamily};
use crate::{Error, Result};

/// Largest prime accepted (alphabets are `u32`).
const MAX_PRIME: u64 = 1 << 31;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeFamilySpec {
    pub n: usize,
    /// `p_1 .. p_{2^N - 2}`.
    #[serde(with = "serde_bigint_vec")]
    pub primes: Vec<BigInt>,
    /// Least prime above every `p_n`.
    #[serde(with = "serde_bigint")]
    pub m: BigInt,
    /// `q_j = prod_{n : j in A_n} p_n`.
    #[serde(with = "serde_bigint_vec")]
    pub q: Vec<BigInt>,
}

/// Deterministic Miller-Rabin for 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in BASES {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    let mul = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let pow = |mut b: u64, mut e: u64| {
        let mut r = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                r = mul(r, b);
            }
            b = mul(b, b);
            e >>= 1;
        }
        r
    };
    'witness: for a in BASES {
        let mut x = pow(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

pub fn next_prime_above(n: u64) -> u64 {
    let mut c = n + 1;
    while !is_prime(c) {
        c += 1;
    }
    c
}

/// Whether `j` (1-based) lies in `A_n` for a proper-subset index `n`.
fn contains(mask: u64, j: usize) -> bool {
    mask >> (j - 1) & 1 == 1
}

pub fn prime_exponents(n: usize, primes: &[BigInt]) -> Result<PrimeFamilySpec> {
    if !(2..=16).contains(&n) {
        return Err(Error::Validation(format!("N = {n} must lie in 2..=16")));
    }
    let expected = (1usize << n) - 2;
    if primes.len() != expected {
        return Err(Error::WrongPrimeCount { expected, got: primes.len() });
    }
    let mut small = Vec::with_capacity(primes.len());
    for p in primes {
        match p.to_u64() {
            Some(v) if v < MAX_PRIME && is_prime(v) => small.push(v),
            _ => return Err(Error::NotPrime(p.to_string())),
        }
    }
    let mut sorted = small.clone();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::RepeatedPrimes(w[0].to_string()));
    }
    let m = next_prime_above(*sorted.last().expect("at least two primes"));
    let q = (1..=n)
        .map(|j| {
            (1..=expected as u64)
                .filter(|&mask| contains(mask, j))
                .map(|mask| BigInt::from(small[mask as usize - 1]))
                .product()
        })
        .collect();
    Ok(PrimeFamilySpec { n, primes: primes.to_vec(), m: BigInt::from(m), q })
}

impl PrimeFamilySpec {
    pub fn profile_count(&self) -> usize {
        1 << self.n
    }

    /// Subset bitmask for a profile index in `0..2^N`.
    pub fn subset(&self, n_index: usize) -> u64 {
        let last = self.profile_count() - 1;
        match n_index {
            0 => last as u64,
            i if i == last => 0,
            i => i as u64,
        }
    }

    pub fn subset_members(&self, n_index: usize) -> Vec<usize> {
        let mask = self.subset(n_index);
        (1..=self.n).filter(|&j| contains(mask, j)).collect()
    }

    /// `p_0 = 1`, `p_n` for proper subsets, `M` for the empty set.
    pub fn prime_for(&self, n_index: usize) -> BigInt {
        let last = self.profile_count() - 1;
        match n_index {
            0 => BigInt::one(),
            i if i == last => self.m.clone(),
            i => self.primes[i - 1].clone(),
        }
    }

    /// `c_n = max(p_n - 1, 1)`.
    pub fn c(&self, n_index: usize) -> u32 {
        let p = self.prime_for(n_index).to_u32().expect("primes are below 2^31");
        p.saturating_sub(1).max(1)
    }

    /// `xi_j = 1 - 1_{A_n}(j)`.
    pub fn xi(&self, n_index: usize) -> Vec<bool> {
        let mask = self.subset(n_index);
        (1..=self.n).map(|j| !contains(mask, j)).collect()
    }

    /// `P = prod_{r=1}^{2^N - 1} p_r`, including `M`.
    pub fn product(&self) -> BigInt {
        self.primes.iter().product::<BigInt>() * &self.m
    }

    /// `phi_j(n) = q_j n`.
    pub fn family(&self) -> SequenceFamily {
        SequenceFamily::polynomials(
            self.q.iter().map(|q| IntPolynomial::new(vec![BigInt::zero(), q.clone()])).collect(),
        )
        .expect("N >= 2")
    }
}

/// `|(1/(c+1)) sum_{r=0}^{c} e(q r / p)|^2`.
pub fn character_average(q: &BigInt, p: &BigInt, c: u32) -> Result<f64> {
    if c == 0 || p.is_zero() {
        return Err(Error::Validation("character average needs c >= 1 and p != 0".into()));
    }
    let theta = torus_reduce(&Rational::new(q.clone(), p.clone()));
    Ok(digit_average_power(&theta, c + 1))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeCertificate {
    pub n: usize,
    #[serde(with = "serde_bigint_vec")]
    pub primes: Vec<BigInt>,
    #[serde(with = "serde_bigint")]
    pub m: BigInt,
    #[serde(with = "serde_bigint")]
    pub product: BigInt,
}

impl PrimeCertificate {
    pub(crate) fn verify(&self, entries: &[BigInt]) -> Result<()> {
        let spec = prime_exponents(self.n, &self.primes)
            .map_err(|e| Error::Violation(format!("prime data invalid: {e}")))?;
        if spec.m != self.m || spec.product() != self.product {
            return Err(Error::Violation("M or the prime product does not match".into()));
        }
        let expect = prime_anchor_entries(&self.product, entries.len());
        if expect != entries {
            return Err(Error::Violation("anchor differs from P^(2k) k!".into()));
        }
        Ok(())
    }
}

fn prime_anchor_entries(product: &BigInt, k_count: usize) -> Vec<BigInt> {
    let square = product * product;
    let mut power = BigInt::one();
    let mut factorial = BigInt::one();
    (1..=k_count)
        .map(|k| {
            power *= &square;
            factorial *= k;
            &power * &factorial
        })
        .collect()
}

/// `n_k = P^{2k} k!` for `k <= K`.
pub fn prime_anchor(spec: &PrimeFamilySpec, k_count: usize) -> Result<AnchorSequence> {
    if k_count == 0 {
        return Err(Error::Validation("K must be positive".into()));
    }
    let product = spec.product();
    Ok(AnchorSequence {
        entries: prime_anchor_entries(&product, k_count),
        certificate: Certificate::Prime(PrimeCertificate {
            n: spec.n,
            primes: spec.primes.clone(),
            m: spec.m.clone(),
            product,
        }),
    })
}

/// Levels `(1/(p n_t), c + 1)` for `t <= T`; beyond `T`,
/// `n_{t+1} / n_t = P^2 (t+1)` gives the ratio `1 / (P^2 (T+1))`.
pub fn build_coin_measure_prime(
    spec: &PrimeFamilySpec,
    n_index: usize,
    anchor: &[BigInt],
    t_count: usize,
) -> Result<CoinMeasure> {
    if n_index >= spec.profile_count() {
        return Err(Error::IndexOutOfRange { index: n_index, len: spec.profile_count() });
    }
    if anchor.len() < t_count {
        return Err(Error::Validation(format!("anchor has {} entries, need {t_count}", anchor.len())));
    }
    if t_count == 0 {
        return Ok(CoinMeasure::empty());
    }
    let p = spec.prime_for(n_index);
    let a = spec.c(n_index) + 1;
    let levels = anchor[..t_count]
        .iter()
        .map(|n| CoinLevel::new(&Rational::new(BigInt::one(), &p * n), a))
        .collect::<Result<Vec<_>>>()?;
    let scale = Rational::new(BigInt::one(), &p * &anchor[t_count - 1]);
    let product = spec.product();
    let ratio = Rational::new(BigInt::one(), &product * &product * BigInt::from(t_count + 1));
    CoinMeasure::new(levels, TailBound::geometric(scale, ratio)?)
}

/// Checks `phi_l(n_k) C_t = 0 mod 1` for `t < k` and `= q_l / p mod 1` at
/// `t = k`, for all `k <= k_max` and all `l`, through `torus_scale`.
pub fn check_telescoping(
    spec: &PrimeFamilySpec,
    n_index: usize,
    measure: &CoinMeasure,
    anchor: &[BigInt],
    k_max: usize,
) -> Result<usize> {
    if measure.len() < k_max || anchor.len() < k_max {
        return Err(Error::Validation("not enough levels for the telescoping check".into()));
    }
    let p = spec.prime_for(n_index);
    let mut checked = 0;
    for (k, n_k) in anchor.iter().enumerate().take(k_max) {
        for (l, q) in spec.q.iter().enumerate() {
            let v = q * n_k;
            for t in 0..=k {
                let got = torus_scale(&v, measure.levels()[t].frequency().value());
                let want = if t < k { torus_reduce(&Rational::zero()) } else { torus_reduce(&Rational::new(q.clone(), p.clone())) };
                if got != want {
                    return Err(Error::Violation(format!(
                        "telescoping fails at n_index {n_index}, k {}, l {}, t {}",
                        k + 1,
                        l + 1,
                        t + 1
                    )));
                }
                checked += 1;
            }
        }
    }
    Ok(checked)
}

/// `gcd(q_j, M) = 1` for every `j`.
pub fn check_coprime(spec: &PrimeFamilySpec) -> Result<()> {
    for (j, q) in spec.q.iter().enumerate() {
        if !q.gcd(&spec.m).is_one() {
            return Err(Error::Violation(format!("q_{} shares a factor with M", j + 1)));
        }
    }
    Ok(())
}

/// One row per profile index: subset, prime, alphabet, and `xi`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProfileRow {
    pub n_index: usize,
    pub subset: Vec<usize>,
    #[serde(with = "serde_bigint")]
    pub prime: BigInt,
    pub c: u32,
    pub xi: String,
    /// `character_average(q_j, p, c)` rounded to 0/1, per `j`.
    pub indicator: Vec<u8>,
}

pub fn profile_table(spec: &PrimeFamilySpec) -> Result<Vec<ProfileRow>> {
    (0..spec.profile_count())
        .map(|i| {
            let p = spec.prime_for(i);
            let c = spec.c(i);
            let indicator = spec
                .q
                .iter()
                .map(|q| character_average(q, &p, c).map(|v| v.round() as u8))
                .collect::<Result<Vec<_>>>()?;
            Ok(ProfileRow {
                n_index: i,
                subset: spec.subset_members(i),
                prime: p,
                c,
                xi: crate::poly::profile_label(&spec.xi(i)),
                indicator,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;

    fn big(n: i64) -> BigInt {
        BigInt::from(n)
    }

    fn primes(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&p| big(p)).collect()
    }

    #[test]
    fn primality() {
        let small: Vec<u64> = (0..60).filter(|&n| is_prime(n)).collect();
        assert_eq!(small, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59]);
        assert!(is_prime(2_147_483_647));
        assert!(!is_prime(3_215_031_751));
        assert_eq!(next_prime_above(13), 17);
    }

    #[test]
    fn exponents() {
        let s = prime_exponents(2, &primes(&[2, 3])).unwrap();
        assert_eq!(s.q, primes(&[2, 3]));
        assert_eq!(s.m, big(5));
        let s = prime_exponents(2, &primes(&[3, 2])).unwrap();
        assert_eq!(s.q, primes(&[3, 2]));
        let s = prime_exponents(3, &primes(&[2, 3, 5, 7, 11, 13])).unwrap();
        // independent scan: subsets as explicit member lists
        let subsets: Vec<Vec<usize>> = (1..=6u64).map(|m| (1..=3).filter(|&j| m >> (j - 1) & 1 == 1).collect()).collect();
        let ps = [2, 3, 5, 7, 11, 13];
        for j in 1..=3 {
            let q: i64 = subsets.iter().zip(ps).filter(|(s, _)| s.contains(&j)).map(|(_, p)| p).product();
            assert_eq!(s.q[j - 1], big(q));
        }
        assert_eq!(s.q, primes(&[2 * 5 * 11, 3 * 5 * 13, 7 * 11 * 13]));
        assert_eq!(s.m, big(17));
        assert!(matches!(prime_exponents(2, &primes(&[2])), Err(Error::WrongPrimeCount { expected: 2, got: 1 })));
        assert!(matches!(prime_exponents(2, &primes(&[3, 3])), Err(Error::RepeatedPrimes(_))));
        assert!(matches!(prime_exponents(2, &primes(&[4, 3])), Err(Error::NotPrime(_))));
    }

    #[test]
    fn character_averages() {
        assert_eq!(character_average(&big(2), &big(2), 1).unwrap(), 1.0);
        assert_eq!(character_average(&big(3), &big(2), 1).unwrap(), 0.0);
        assert_eq!(character_average(&big(12345), &big(1), 1).unwrap(), 1.0);
        assert!(character_average(&big(1), &big(2), 0).is_err());
    }

    #[test]
    fn indicator_identity_all_profiles() {
        for (n, ps) in [(2, vec![2, 3]), (3, vec![2, 3, 5, 7, 11, 13])] {
            let spec = prime_exponents(n, &primes(&ps)).unwrap();
            check_coprime(&spec).unwrap();
            let mut seen = std::collections::BTreeSet::new();
            for i in 0..spec.profile_count() {
                let members = spec.subset_members(i);
                for (j, q) in spec.q.iter().enumerate() {
                    let v = character_average(q, &spec.prime_for(i), spec.c(i)).unwrap();
                    let want = if members.contains(&(j + 1)) { 1.0 } else { 0.0 };
                    assert!((v - want).abs() < 1e-12);
                }
                seen.insert(spec.xi(i));
            }
            assert_eq!(seen.len(), 1 << n);
        }
    }

    #[test]
    fn anchors() {
        let spec = prime_exponents(2, &primes(&[2, 3])).unwrap();
        let a = prime_anchor(&spec, 2).unwrap();
        assert_eq!(a.entries, vec![big(900), big(1_620_000)]);
        assert_eq!(prime_anchor(&spec, 1).unwrap().entries.len(), 1);
        let a = prime_anchor(&spec, 5).unwrap();
        a.verify(&spec.family()).unwrap();
        for n in &a.entries {
            for i in 1..spec.profile_count() {
                assert!(n.is_multiple_of(&(spec.prime_for(i) * &spec.m)));
            }
        }
        let mut bad = a.clone();
        bad.entries[1] += 1;
        assert!(bad.verify(&spec.family()).is_err());
    }

    #[test]
    fn measures() {
        let spec = prime_exponents(2, &primes(&[2, 3])).unwrap();
        let a = prime_anchor(&spec, 2).unwrap();
        // index 1 is A = {1}, p = 2
        assert_eq!(spec.subset_members(1), vec![1]);
        let m = build_coin_measure_prime(&spec, 1, &a.entries, 2).unwrap();
        let cs: Vec<Rational> = m.levels().iter().map(|l| l.frequency().value().clone()).collect();
        assert_eq!(cs, vec![rat(1, 1800), rat(1, 3_240_000)]);
        assert!(m.levels().iter().all(|l| l.alphabet() == 2));
        for i in 0..4 {
            let m = build_coin_measure_prime(&spec, i, &a.entries, 2).unwrap();
            assert_eq!(m.fourier_sigma(&big(0), 1e-9).unwrap().re(), 1.0);
        }
        let full = build_coin_measure_prime(&spec, 3, &a.entries, 2).unwrap();
        assert_eq!(full.levels()[0].alphabet(), 5);
    }

    #[test]
    fn telescoping() {
        let spec = prime_exponents(2, &primes(&[2, 3])).unwrap();
        let a = prime_anchor(&spec, 8).unwrap();
        for i in 0..4 {
            let m = build_coin_measure_prime(&spec, i, &a.entries, 8).unwrap();
            assert!(check_telescoping(&spec, i, &m, &a.entries, 5).unwrap() > 0);
        }
    }

    #[test]
    fn table_rows() {
        let spec = prime_exponents(2, &primes(&[2, 3])).unwrap();
        let rows = profile_table(&spec).unwrap();
        let xis: Vec<&str> = rows.iter().map(|r| r.xi.as_str()).collect();
        assert_eq!(xis, ["00", "01", "10", "11"]);
        for r in rows {
            let from_xi: Vec<u8> = r.xi.chars().map(|c| if c == '0' { 1 } else { 0 }).collect();
            assert_eq!(r.indicator, from_xi);
        }
    }
}
