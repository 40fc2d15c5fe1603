//! Integer sequence families and the asymptotic independence tests.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::serde_bigint_vec;
use crate::linalg::{bareiss_rank, left_null_vector};
use crate::{Error, Result};

/// `a_0 + a_1 x + ... + a_d x^d` with integer coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntPolynomial {
    constant: BigInt,
    coeffs: Vec<BigInt>,
}

impl IntPolynomial {
    /// From the full coefficient list `[a_0, a_1, ..., a_d]`.
    pub fn new(all: Vec<BigInt>) -> Self {
        let mut it = all.into_iter();
        let constant = it.next().unwrap_or_default();
        let mut coeffs: Vec<BigInt> = it.collect();
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        IntPolynomial { constant, coeffs }
    }

    pub fn from_i64(all: &[i64]) -> Self {
        Self::new(all.iter().map(|&c| BigInt::from(c)).collect())
    }

    pub fn constant(&self) -> &BigInt {
        &self.constant
    }

    /// `a_1..a_d`.
    pub fn coefficients(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    pub fn all_coefficients(&self) -> Vec<BigInt> {
        std::iter::once(self.constant.clone()).chain(self.coeffs.iter().cloned()).collect()
    }

    pub fn eval(&self, n: &BigInt) -> BigInt {
        let mut acc = BigInt::zero();
        for c in self.coeffs.iter().rev() {
            acc = (acc + c) * n;
        }
        acc + &self.constant
    }

    /// Value reduced into `[0, modulus)`.
    pub fn eval_mod(&self, n: &BigInt, modulus: &BigInt) -> BigInt {
        let x = n.mod_floor(modulus);
        let mut acc = BigInt::zero();
        for c in self.coeffs.iter().rev() {
            acc = ((acc + c) * &x).mod_floor(modulus);
        }
        (acc + &self.constant).mod_floor(modulus)
    }
}

/// One member `phi_j` of a family.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Member {
    /// Coefficients `[a_0, ..., a_d]`.
    Poly(#[serde(with = "poly_serde")] IntPolynomial),
    /// Values `phi(1), ..., phi(len)`.
    Table(#[serde(with = "serde_bigint_vec")] Vec<BigInt>),
}

mod poly_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &IntPolynomial, s: S) -> std::result::Result<S::Ok, S::Error> {
        serde_bigint_vec::serialize(&p.all_coefficients(), s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<IntPolynomial, D::Error> {
        Ok(IntPolynomial::new(serde_bigint_vec::deserialize(d)?))
    }
}

/// `phi_1, ..., phi_N`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceFamily {
    members: Vec<Member>,
}

/// Outcome of [`SequenceFamily::is_asymptotically_independent`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Independence {
    pub independent: bool,
    /// False for the empirical verdict on tabulated members.
    pub conclusive: bool,
    #[serde(with = "crate::arith::serde_bigint_opt_vec")]
    pub witness: Option<Vec<BigInt>>,
}

impl SequenceFamily {
    pub fn new(members: Vec<Member>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyFamily);
        }
        for (j, m) in members.iter().enumerate() {
            if let Member::Table(t) = m {
                if t.is_empty() {
                    return Err(Error::Validation(format!("member {} has an empty table", j + 1)));
                }
            }
        }
        Ok(SequenceFamily { members })
    }

    pub fn polynomials(polys: Vec<IntPolynomial>) -> Result<Self> {
        Self::new(polys.into_iter().map(Member::Poly).collect())
    }

    /// Convenience for tests and examples: `&[&[a_0, a_1, ...], ...]`.
    pub fn from_coeffs(polys: &[&[i64]]) -> Self {
        Self::polynomials(polys.iter().map(|p| IntPolynomial::from_i64(p)).collect())
            .expect("nonempty family")
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn is_polynomial(&self) -> bool {
        self.members.iter().all(|m| matches!(m, Member::Poly(_)))
    }

    /// Smallest table length, `None` for pure polynomial families.
    pub fn table_bound(&self) -> Option<u64> {
        self.members
            .iter()
            .filter_map(|m| match m {
                Member::Table(t) => Some(t.len() as u64),
                Member::Poly(_) => None,
            })
            .min()
    }

    /// Largest polynomial degree `d`.
    pub fn degree(&self) -> usize {
        self.members
            .iter()
            .map(|m| match m {
                Member::Poly(p) => p.degree(),
                Member::Table(_) => 0,
            })
            .max()
            .unwrap_or(0)
    }

    /// `phi_j(n)` for `1 <= j <= N`.
    pub fn eval_member(&self, j: usize, n: &BigInt) -> Result<BigInt> {
        let member = self
            .members
            .get(j.wrapping_sub(1))
            .ok_or(Error::IndexOutOfRange { index: j, len: self.len() })?;
        match member {
            Member::Poly(p) => Ok(p.eval(n)),
            Member::Table(t) => {
                let idx = n.to_u64().filter(|&k| k >= 1 && k <= t.len() as u64);
                match idx {
                    Some(k) => Ok(t[(k - 1) as usize].clone()),
                    None => Err(Error::TableBoundExceeded {
                        member: j,
                        requested: n.to_string(),
                        bound: t.len() as u64,
                    }),
                }
            }
        }
    }

    pub fn eval_all(&self, n: &BigInt) -> Result<Vec<BigInt>> {
        (1..=self.len()).map(|j| self.eval_member(j, n)).collect()
    }

    /// `D` with `D[j][s-1] = a_{j,s}`.
    pub fn coefficient_matrix(&self) -> Result<Vec<Vec<BigInt>>> {
        let d = self.degree();
        self.members
            .iter()
            .enumerate()
            .map(|(j, m)| match m {
                Member::Poly(p) if p.constant().is_zero() => {
                    let mut row = p.coefficients().to_vec();
                    row.resize(d, BigInt::zero());
                    Ok(row)
                }
                Member::Poly(_) => Err(Error::NonzeroConstantTerm(j + 1)),
                Member::Table(_) => Err(Error::NonPolynomialMember(j + 1)),
            })
            .collect()
    }

    fn shifted_matrix(&self) -> Vec<Vec<BigInt>> {
        let d = self.degree();
        self.members
            .iter()
            .map(|m| match m {
                Member::Poly(p) => {
                    let mut row = p.coefficients().to_vec();
                    row.resize(d, BigInt::zero());
                    row
                }
                Member::Table(_) => unreachable!("checked by caller"),
            })
            .collect()
    }

    pub fn is_asymptotically_independent(&self) -> Result<Independence> {
        self.is_asymptotically_independent_in_box(3)
    }

    /// Exact rank test for polynomial families; for tabulated members an
    /// empirical growth check over the coefficient box `|a|_inf <= coeff_box`.
    pub fn is_asymptotically_independent_in_box(&self, coeff_box: i64) -> Result<Independence> {
        if self.is_empty() {
            return Err(Error::EmptyFamily);
        }
        if self.is_polynomial() {
            let m = self.shifted_matrix();
            if self.degree() > 0 && bareiss_rank(&m) == self.len() {
                return Ok(Independence { independent: true, conclusive: true, witness: None });
            }
            let witness = if self.degree() == 0 {
                let mut w = vec![BigInt::zero(); self.len()];
                w[0] = BigInt::one();
                w
            } else {
                left_null_vector(&m).expect("rank deficient matrix has a left kernel")
            };
            return Ok(Independence { independent: false, conclusive: true, witness: Some(witness) });
        }
        let h = self.table_bound().unwrap_or(0);
        let values = self.value_table(h)?;
        for a in box_vectors(self.len(), coeff_box) {
            let c: Vec<BigInt> = values.iter().map(|row| combine(&a, row)).collect();
            let early = c[..(h as usize / 4).max(1)].iter().map(|v| v.abs()).max().unwrap_or_default();
            let late = c[(h as usize / 2).min(c.len() - 1)..].iter().map(|v| v.abs()).min().unwrap_or_default();
            if late <= early {
                return Ok(Independence {
                    independent: false,
                    conclusive: false,
                    witness: Some(a.into_iter().map(BigInt::from).collect()),
                });
            }
        }
        Ok(Independence { independent: true, conclusive: false, witness: None })
    }

    /// `Phi(k) = max_j |phi_j(k)| + 1`.
    pub fn phi_bound(&self, k: &BigInt) -> Result<BigInt> {
        let mut best = BigInt::zero();
        for j in 1..=self.len() {
            let v = self.eval_member(j, k)?.abs();
            if v > best {
                best = v;
            }
        }
        Ok(best + 1)
    }

    fn value_table(&self, h: u64) -> Result<Vec<Vec<BigInt>>> {
        (1..=h).map(|k| self.eval_all(&BigInt::from(k))).collect()
    }

    /// Eventual direction of `sum a_j phi_j`: +1, -1, or 0 when it never moves.
    fn direction(&self, a: &[i64], values: &[Vec<BigInt>]) -> i32 {
        if self.is_polynomial() {
            let poly = self.combination(a);
            return match poly.coefficients().last() {
                Some(c) if c.is_positive() => 1,
                Some(_) => -1,
                None => 0,
            };
        }
        let last = combine(a, values.last().expect("nonempty table"));
        let first = combine(a, &values[0]);
        let s = if last.is_zero() { &last - &first } else { last };
        match s.sign() {
            num_bigint::Sign::Plus => 1,
            num_bigint::Sign::Minus => -1,
            num_bigint::Sign::NoSign => 0,
        }
    }

    /// `sum_j a_j v_j` for a polynomial family.
    pub fn combination(&self, a: &[i64]) -> IntPolynomial {
        let mut all: Vec<BigInt> = vec![BigInt::zero(); self.degree() + 1];
        for (aj, m) in a.iter().zip(&self.members) {
            if let Member::Poly(p) = m {
                for (s, c) in p.all_coefficients().iter().enumerate() {
                    all[s] += c * aj;
                }
            }
        }
        IntPolynomial::new(all)
    }

    /// Greedy increasing index list on which every boxed combination is
    /// strictly monotone (each in its eventual direction).
    pub fn strongly_independent_subsequence(&self, coeff_box: i64, horizon: u64) -> Result<Vec<u64>> {
        if self.is_empty() {
            return Err(Error::EmptyFamily);
        }
        let horizon = match self.table_bound() {
            Some(b) => horizon.min(b),
            None => horizon,
        };
        let values = self.value_table(horizon)?;
        if values.is_empty() {
            return Err(Error::SearchExhausted("horizon is zero".into()));
        }
        let boxes = box_vectors(self.len(), coeff_box);
        let dirs: Vec<i32> = boxes.iter().map(|a| self.direction(a, &values)).collect();
        if let Some(pos) = dirs.iter().position(|&d| d == 0) {
            return Err(Error::SearchExhausted(format!(
                "combination {:?} never moves",
                boxes[pos]
            )));
        }
        let combos: Vec<Vec<BigInt>> =
            values.iter().map(|row| boxes.iter().map(|a| combine(a, row)).collect()).collect();
        let mut chosen: Vec<u64> = Vec::new();
        for i in 0..horizon as usize {
            let ok = match chosen.last() {
                None => true,
                Some(&last) => {
                    let prev = &combos[last as usize - 1];
                    combos[i].iter().zip(prev).zip(&dirs).all(|((c, p), &d)| {
                        if d > 0 {
                            c > p
                        } else {
                            c < p
                        }
                    })
                }
            };
            if ok {
                chosen.push(i as u64 + 1);
            }
        }
        if chosen.len() < 2 {
            return Err(Error::SearchExhausted(format!("no second index up to horizon {horizon}")));
        }
        Ok(chosen)
    }

    /// An index `n*` beyond which, for a polynomial family, every boxed
    /// combination is strictly monotone and every member has constant sign and
    /// growing absolute value (Cauchy root bounds).
    pub fn monotone_threshold(&self, coeff_box: i64) -> Result<BigInt> {
        if !self.is_polynomial() {
            return Err(Error::NonPolynomialMember(
                self.members.iter().position(|m| matches!(m, Member::Table(_))).unwrap_or(0) + 1,
            ));
        }
        let mut n_star = BigInt::one();
        for a in box_vectors(self.len(), coeff_box) {
            let diff = forward_difference(&self.combination(&a));
            if diff.iter().all(|c| c.is_zero()) {
                return Err(Error::DependentFamily {
                    witness: a.iter().map(|v| v.to_string()).collect(),
                });
            }
            n_star = n_star.max(cauchy_bound(&diff));
        }
        for m in &self.members {
            if let Member::Poly(p) = m {
                n_star = n_star.max(cauchy_bound(&p.all_coefficients()));
                n_star = n_star.max(cauchy_bound(&forward_difference(p)));
            }
        }
        Ok(n_star)
    }
}

/// Nonzero integer vectors in `[-b, b]^n`, one from each `{a, -a}` pair (the
/// one whose first nonzero entry is positive).
pub fn box_vectors(n: usize, b: i64) -> Vec<Vec<i64>> {
    let side = (2 * b + 1) as usize;
    let total = side.pow(n as u32);
    let mut out = Vec::new();
    for code in 0..total {
        let mut a = Vec::with_capacity(n);
        let mut c = code;
        for _ in 0..n {
            a.push((c % side) as i64 - b);
            c /= side;
        }
        a.reverse();
        if a.iter().find(|&&v| v != 0).is_some_and(|&v| v > 0) {
            out.push(a);
        }
    }
    out
}

fn combine(a: &[i64], row: &[BigInt]) -> BigInt {
    a.iter().zip(row).map(|(&x, v)| v * x).sum()
}

/// Coefficients `[c_0, ..., c_{d-1}]` of `p(x+1) - p(x)`.
pub fn forward_difference(p: &IntPolynomial) -> Vec<BigInt> {
    let all = p.all_coefficients();
    let d = all.len().saturating_sub(1);
    let mut out = vec![BigInt::zero(); d.max(1)];
    // (x+1)^s - x^s = sum_{i<s} C(s,i) x^i
    for (s, c) in all.iter().enumerate().skip(1) {
        let mut binom = BigInt::one();
        for i in 0..s {
            out[i] += c * &binom;
            binom = binom * (s - i) / (i + 1);
        }
    }
    out
}

/// `1 + ceil(max_{i<n} |c_i| / |c_n|)`: every integer at or beyond it has the
/// sign of the leading coefficient. Zero for constants.
pub fn cauchy_bound(coeffs: &[BigInt]) -> BigInt {
    let Some(top) = coeffs.iter().rposition(|c| !c.is_zero()) else {
        return BigInt::zero();
    };
    if top == 0 {
        return BigInt::zero();
    }
    let lead = coeffs[top].abs();
    let max = coeffs[..top].iter().map(|c| c.abs()).max().unwrap_or_default();
    BigInt::one() + max.div_ceil(&lead)
}
