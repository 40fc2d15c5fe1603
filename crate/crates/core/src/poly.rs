//! The polynomial construction: profile vectors `b`, exact solutions of
//! `D x = b`, the divisibility-constrained anchor, and the coin measures with
//! `C_t = sum_s x_s / n_t^s`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{
    dist_to_int, half, serde_bigint, serde_rational, serde_rational_vec, torus_reduce, torus_scale, Rational,
};
use crate::coin::{CoinLevel, CoinMeasure, TailBound};
use crate::generic::GenericCertificate;
use crate::linalg::rref;
use crate::prime::PrimeCertificate;
use crate::sequences::{Member, SequenceFamily};
use crate::{Error, Result};

/// A target profile: `xi_j = 1` asks for mixing along `phi_j`, `xi_j = 0` for
/// rigidity; `b_j = 1 - xi_j / 2`. In lambda mode `lambda` holds interpolation
/// weights and `b_j = 1 - lambda_j / 2`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixingProfile {
    pub xi: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_rational_vec")]
    pub lambda: Option<Vec<Rational>>,
    #[serde(with = "serde_rational_vec")]
    pub b: Vec<Rational>,
}

mod opt_rational_vec {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<Rational>>, s: S) -> std::result::Result<S::Ok, S::Error> {
        match v {
            Some(v) => serde_rational_vec::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Vec<Rational>>, D::Error> {
        serde_rational_vec::deserialize(d).map(Some)
    }
}

pub fn make_profile(xi: &[bool]) -> Result<MixingProfile> {
    if xi.is_empty() {
        return Err(Error::Validation("empty profile".into()));
    }
    let b = xi.iter().map(|&x| if x { half() } else { Rational::one() }).collect();
    Ok(MixingProfile { xi: xi.to_vec(), lambda: None, b })
}

impl MixingProfile {
    /// Nondecreasing weights in `[0, 1]`.
    pub fn from_lambda(lambda: Vec<Rational>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::Validation("empty lambda".into()));
        }
        let zero = Rational::zero();
        let one = Rational::one();
        if lambda.iter().any(|l| *l < zero || *l > one) || lambda.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Validation("lambda must be nondecreasing in [0, 1]".into()));
        }
        let xi = lambda.iter().map(|l| *l == one).collect();
        let b = lambda.iter().map(|l| Rational::one() - l * half()).collect();
        Ok(MixingProfile { xi, lambda: Some(lambda), b })
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    /// `"01"` style label.
    pub fn label(&self) -> String {
        profile_label(&self.xi)
    }
}

pub fn profile_label(xi: &[bool]) -> String {
    xi.iter().map(|&x| if x { '1' } else { '0' }).collect()
}

pub fn parse_profile(label: &str) -> Result<Vec<bool>> {
    label
        .chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::Parse(format!("profile {label:?} is not a 0/1 string"))),
        })
        .collect()
}

/// `{0,1}^n` in lexicographic order of labels.
pub fn all_profiles(n: usize) -> Vec<Vec<bool>> {
    (0..1usize << n)
        .map(|code| (0..n).map(|j| code >> (n - 1 - j) & 1 == 1).collect())
        .collect()
}

/// A solution of `D x = b`, free variables set to zero.
pub fn solve_rational(d: &[Vec<BigInt>], b: &[Rational]) -> Result<Vec<Rational>> {
    let rows = d.len();
    if rows != b.len() {
        return Err(Error::Validation(format!("{} equations, {} right-hand sides", rows, b.len())));
    }
    let cols = d.first().map_or(0, |r| r.len());
    let mut aug: Vec<Vec<Rational>> = d
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r: Vec<Rational> = row.iter().map(|v| Rational::from_integer(v.clone())).collect();
            r.push(bi.clone());
            r
        })
        .collect();
    let pivots = rref(&mut aug);
    let rank = pivots.iter().filter(|&&p| p < cols).count();
    if rank < rows {
        return Err(Error::RankDeficient { rank, needed: rows });
    }
    let mut x = vec![Rational::zero(); cols];
    for (i, &p) in pivots.iter().enumerate() {
        x[p] = aug[i][cols].clone();
    }
    if x.iter().all(|v| v.is_zero()) {
        // only when b = 0: take a kernel vector instead
        let Some(free) = (0..cols).find(|c| !pivots.contains(c)) else {
            return Err(Error::Validation("the only solution is x = 0".into()));
        };
        x[free] = Rational::one();
        for (i, &p) in pivots.iter().enumerate() {
            x[p] = -aug[i][free].clone();
        }
    }
    Ok(x)
}

/// Increasing anchor `(n_k)` with a re-checkable record of how each entry was
/// accepted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorSequence {
    #[serde(with = "crate::arith::serde_bigint_vec")]
    pub entries: Vec<BigInt>,
    pub certificate: Certificate,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Certificate {
    Poly(PolyCertificate),
    Generic(GenericCertificate),
    Prime(PrimeCertificate),
}

impl AnchorSequence {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Re-derives every recorded condition from the family and the entries.
    pub fn verify(&self, family: &SequenceFamily) -> Result<()> {
        if self.entries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Violation("anchor is not strictly increasing".into()));
        }
        match &self.certificate {
            Certificate::Poly(c) => c.verify(family, &self.entries),
            Certificate::Generic(c) => c.verify(family, &self.entries),
            Certificate::Prime(c) => c.verify(&self.entries),
        }
    }
}

/// Profile and solution vector stored alongside a polynomial anchor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileSolution {
    pub xi: String,
    #[serde(with = "serde_rational_vec")]
    pub x: Vec<Rational>,
}

/// Witnesses for conditions (a) `d n0 |x_j| < n_1`, (b) `x_j n_k` integral,
/// (c) `2 d n_{k-1}^{d+1} | n_k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolyCertificate {
    pub d: usize,
    #[serde(with = "serde_bigint")]
    pub n0: BigInt,
    pub solutions: Vec<ProfileSolution>,
    /// `d * n0 * max |x_j|` over all profiles and coordinates.
    #[serde(with = "serde_rational")]
    pub condition_a: Rational,
    /// lcm of all denominators of the `x_j`.
    #[serde(with = "serde_bigint")]
    pub denominator_lcm: BigInt,
    pub entries: Vec<PolyAnchorRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolyAnchorRecord {
    pub k: usize,
    /// Position of `n_k` in the base sequence.
    pub base_index: u64,
    /// `n_k / denominator_lcm`.
    #[serde(with = "serde_bigint")]
    pub b_quotient: BigInt,
    /// `n_k / (2 d n_{k-1}^{d+1})`, absent at `k = 1`.
    #[serde(with = "crate::arith::serde_bigint_opt")]
    pub c_quotient: Option<BigInt>,
}

fn chain_divisor(d: usize, prev: &BigInt) -> BigInt {
    BigInt::from(2 * d) * prev.pow(d as u32 + 1)
}

impl PolyCertificate {
    fn verify(&self, family: &SequenceFamily, entries: &[BigInt]) -> Result<()> {
        let fail = |msg: String| Err(Error::Violation(msg));
        let matrix = family.coefficient_matrix()?;
        if self.d != family.degree() {
            return fail(format!("certificate degree {} but family degree {}", self.d, family.degree()));
        }
        let mut max_x = Rational::zero();
        let mut lcm = BigInt::one();
        for sol in &self.solutions {
            let xi = parse_profile(&sol.xi)?;
            let profile = make_profile(&xi)?;
            for (row, b) in matrix.iter().zip(&profile.b) {
                let lhs: Rational = row.iter().zip(&sol.x).map(|(a, x)| Rational::from_integer(a.clone()) * x).sum();
                if &lhs != b {
                    return fail(format!("D x != b for profile {}", sol.xi));
                }
            }
            for x in &sol.x {
                max_x = max_x.max(x.abs());
                lcm = lcm.lcm(x.denom());
            }
        }
        let cond_a = Rational::from_integer(BigInt::from(self.d) * &self.n0) * &max_x;
        if cond_a != self.condition_a || lcm != self.denominator_lcm {
            return fail("condition (a) or (b) data does not match the solutions".into());
        }
        if self.entries.len() != entries.len() {
            return fail("certificate length differs from anchor length".into());
        }
        if let Some(n1) = entries.first() {
            if Rational::from_integer(n1.clone()) <= cond_a {
                return fail("condition (a) fails at n_1".into());
            }
        }
        for (i, (rec, n)) in self.entries.iter().zip(entries).enumerate() {
            if rec.k != i + 1 || &rec.b_quotient * &self.denominator_lcm != *n {
                return fail(format!("condition (b) fails at k = {}", i + 1));
            }
            match (&rec.c_quotient, i) {
                (None, 0) => {}
                (Some(q), i) if i > 0 => {
                    if q * chain_divisor(self.d, &entries[i - 1]) != *n {
                        return fail(format!("condition (c) fails at k = {}", i + 1));
                    }
                }
                _ => return fail(format!("condition (c) record malformed at k = {}", i + 1)),
            }
        }
        Ok(())
    }
}

/// Factorials `1!, 2!, 3!, ...`, the default base sequence.
#[derive(Clone, Debug)]
pub struct FactorialBase {
    k: u64,
    value: BigInt,
}

impl FactorialBase {
    pub fn new() -> Self {
        FactorialBase { k: 0, value: BigInt::one() }
    }
}

impl Default for FactorialBase {
    fn default() -> Self {
        Self::new()
    }
}

impl Iterator for FactorialBase {
    type Item = BigInt;
    fn next(&mut self) -> Option<BigInt> {
        self.k += 1;
        self.value *= self.k;
        Some(self.value.clone())
    }
}

/// Scans `base` (whose `k`-th entry must be divisible by `k!`) greedily for
/// `K` entries satisfying (a), (b), (c) for every supplied solution at once.
pub fn choose_anchor_poly(
    family: &SequenceFamily,
    solutions: &[(Vec<bool>, Vec<Rational>)],
    base: impl Iterator<Item = BigInt>,
    k_count: usize,
    n0: &BigInt,
    scan_limit: u64,
) -> Result<AnchorSequence> {
    if solutions.is_empty() {
        return Err(Error::Validation("no solutions supplied".into()));
    }
    if *n0 <= BigInt::one() {
        return Err(Error::Validation("n0 must exceed 1".into()));
    }
    let d = family.degree();
    if d == 0 {
        return Err(Error::Validation("family has degree 0".into()));
    }
    let mut max_x = Rational::zero();
    let mut lcm = BigInt::one();
    for (_, x) in solutions {
        if x.iter().all(|v| v.is_zero()) {
            return Err(Error::Validation("solution vector is zero".into()));
        }
        for v in x {
            max_x = max_x.max(v.abs());
            lcm = lcm.lcm(v.denom());
        }
    }
    let cond_a = Rational::from_integer(BigInt::from(d) * n0) * &max_x;
    let mut entries: Vec<BigInt> = Vec::new();
    let mut records = Vec::new();
    let mut factorial = BigInt::one();
    let mut modulus = lcm.clone();
    for (idx, m) in base.enumerate() {
        if entries.len() == k_count {
            break;
        }
        let index = idx as u64 + 1;
        if index > scan_limit {
            break;
        }
        factorial *= index;
        if !m.is_multiple_of(&factorial) {
            return Err(Error::Validation(format!("base entry {index} is not divisible by {index}!")));
        }
        if entries.is_empty() && Rational::from_integer(m.clone()) <= cond_a {
            continue;
        }
        if !m.is_multiple_of(&modulus) {
            continue;
        }
        let c_quotient = entries.last().map(|prev| &m / chain_divisor(d, prev));
        records.push(PolyAnchorRecord {
            k: entries.len() + 1,
            base_index: index,
            b_quotient: &m / &lcm,
            c_quotient,
        });
        modulus = lcm.lcm(&chain_divisor(d, &m));
        entries.push(m);
    }
    if entries.len() < k_count {
        return Err(Error::ScanExhausted(format!(
            "found {} of {k_count} anchor entries within {scan_limit} base entries",
            entries.len()
        )));
    }
    let certificate = PolyCertificate {
        d,
        n0: n0.clone(),
        solutions: solutions
            .iter()
            .map(|(xi, x)| ProfileSolution { xi: profile_label(xi), x: x.clone() })
            .collect(),
        condition_a: cond_a,
        denominator_lcm: lcm,
        entries: records,
    };
    Ok(AnchorSequence { entries, certificate: Certificate::Poly(certificate) })
}

/// `sum_s x_s / n^s` before reduction mod 1.
pub fn poly_frequency(x: &[Rational], n: &BigInt) -> Rational {
    let mut acc = Rational::zero();
    let mut power = BigInt::one();
    for xs in x {
        power *= n;
        acc += xs / Rational::from_integer(power.clone());
    }
    acc
}

/// Levels `(C_t, 2)` for `t <= T`, tail `B_{T+i} <= B_T (2 d n_T^d)^{-i}` with
/// `B_t = d max|x_s| / n_t`.
pub fn build_coin_measure_poly(x: &[Rational], anchor: &[BigInt], t_count: usize) -> Result<CoinMeasure> {
    if anchor.len() < t_count {
        return Err(Error::Validation(format!("anchor has {} entries, need {t_count}", anchor.len())));
    }
    if t_count == 0 {
        return Ok(CoinMeasure::empty());
    }
    let d = x.len();
    if d == 0 {
        return Err(Error::Validation("empty solution vector".into()));
    }
    let levels = anchor[..t_count]
        .iter()
        .map(|n| CoinLevel::new(&poly_frequency(x, n), 2))
        .collect::<Result<Vec<_>>>()?;
    let max_x = x.iter().map(|v| v.abs()).max().expect("nonempty");
    let n_t = &anchor[t_count - 1];
    let scale = Rational::from_integer(BigInt::from(d)) * max_x / Rational::from_integer(n_t.clone());
    let ratio = Rational::new(BigInt::one(), BigInt::from(2 * d) * n_t.pow(d as u32));
    CoinMeasure::new(levels, TailBound::geometric(scale, ratio)?)
}

/// `sum_l |a_{j,l}| * 2 n_1 / (n_k - 1)`: the per-`omega` distance bound of the
/// key estimate.
pub fn key_estimate_bound(row_abs_sum: &BigInt, n1: &BigInt, nk: &BigInt) -> Rational {
    Rational::new(row_abs_sum * BigInt::from(2) * n1, nk - BigInt::one())
}

/// The `sigma`-level bound `2 * key_estimate_bound + 2 eps` used to check
/// correlation tables (exact part returned; add `2 eps` in floats).
pub fn correlation_bound(family: &SequenceFamily, j: usize, anchor: &[BigInt], k: usize) -> Result<Rational> {
    let row = match family.members().get(j.wrapping_sub(1)) {
        Some(Member::Poly(p)) => p.coefficients().iter().map(|a| a.abs()).sum::<BigInt>(),
        Some(Member::Table(_)) => return Err(Error::NonPolynomialMember(j)),
        None => return Err(Error::IndexOutOfRange { index: j, len: family.len() }),
    };
    Ok(key_estimate_bound(&row, &anchor[0], &anchor[k - 1]) * Rational::from_integer(BigInt::from(2)))
}

/// For every digit string `omega in {0,1}^T` (bit `t-1` of the index is
/// `omega(t)`), `|| v_j(n_k) f(omega) - b_j omega(k) / 2 ||` with
/// `f(omega) = sum_{t<=T} (C_t / 2) omega(t)` and unreduced `C_t`.
pub fn key_estimate_residuals(
    family: &SequenceFamily,
    j: usize,
    x: &[Rational],
    anchor: &[BigInt],
    k: usize,
) -> Result<Vec<Rational>> {
    let t_count = anchor.len();
    if t_count > 20 {
        return Err(Error::Validation("at most 20 levels can be enumerated".into()));
    }
    let matrix = family.coefficient_matrix()?;
    let row = matrix.get(j.wrapping_sub(1)).ok_or(Error::IndexOutOfRange { index: j, len: family.len() })?;
    let b: Rational = row.iter().zip(x).map(|(a, xs)| Rational::from_integer(a.clone()) * xs).sum();
    let v = family.eval_member(j, &anchor[k - 1])?;
    let terms: Vec<Rational> = anchor
        .iter()
        .map(|n| torus_scale(&v, &(poly_frequency(x, n) * half())).into_value())
        .collect();
    let centre = torus_reduce(&(b * half())).into_value();
    Ok((0..1u32 << t_count)
        .map(|omega| {
            let mut s = Rational::zero();
            for (t, term) in terms.iter().enumerate() {
                if omega >> t & 1 == 1 {
                    s += term;
                }
            }
            if omega >> (k - 1) & 1 == 1 {
                s -= &centre;
            }
            dist_to_int(&s)
        })
        .collect())
}

/// Sizes (decimal digits) of the anchor entries, for reports.
pub fn digit_counts(anchor: &[BigInt]) -> Vec<usize> {
    anchor.iter().map(|n| n.to_string().len()).collect()
}
