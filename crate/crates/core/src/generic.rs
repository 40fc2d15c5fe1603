//! The inductive search for rationals `alpha_k` and a common anchor `(n_k)`
//! that works for any asymptotically independent family, plus the coin
//! measures with levels `(alpha_t, 2)`.
//!
//! Stage `k` draws, for every requested profile, `alpha_k = u / Q_k` with
//! `Q_k = 2^(64+k) Phi(n_{k-1})` and `u` uniform in `[1, 2^64]`, then scans for
//! `n_k > n_{k-1}` with
//!
//! 1. `alpha_k in (0, 1/(2^k Phi(n_{k-1}))]`,
//! 2. `|| phi_l(n_k) alpha_k / 2 - b_l / 2 || < 1/k`,
//! 3. `|| phi_l(n_k) alpha_{k0} / 2 || < 1/k^2` for `k0 < k`.
//!
//! For polynomial families the scan runs over multiples of
//! `lcm(2 Q_{k0} : k0 < k)`, which makes (3) exactly zero when no member has a
//! constant term.

use num_bigint::{BigInt, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::arith::{
    dist_to_int, format_rational, serde_bigint, serde_rational, serde_rational_vec, torus_scale, Rational,
};
use crate::coin::{CoinLevel, CoinMeasure, TailBound};
use crate::poly::{make_profile, parse_profile, profile_label, AnchorSequence, Certificate};
use crate::sequences::{Member, SequenceFamily};
use crate::{Error, Result};

/// Redraws of the `alpha`s allowed per stage before giving up.
pub const RETRY_CAP: usize = 16;

const SEARCH_BOX: i64 = 3;

/// `alpha_k` and the exact distances it achieved, for one profile.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageProfile {
    pub xi: String,
    #[serde(with = "serde_rational")]
    pub alpha: Rational,
    /// Condition (2) distance per `l`.
    #[serde(with = "serde_rational_vec")]
    pub cond2: Vec<Rational>,
    /// Largest condition (3) distance over `k0 < k`, per `l`.
    #[serde(with = "serde_rational_vec")]
    pub cond3: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStage {
    pub k: usize,
    #[serde(with = "serde_bigint")]
    pub n: BigInt,
    /// `Phi(n_{k-1})`.
    #[serde(with = "serde_bigint")]
    pub phi_prev: BigInt,
    /// `Q_k = 2^(64+k) Phi(n_{k-1})`.
    #[serde(with = "serde_bigint")]
    pub q: BigInt,
    pub draws: usize,
    pub scanned: u64,
    pub profiles: Vec<StageProfile>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenericCertificate {
    pub seed: u64,
    pub scan_bound: u64,
    pub profiles: Vec<String>,
    /// Index from which every boxed combination is monotone (polynomial
    /// families only).
    #[serde(with = "crate::arith::serde_bigint_opt")]
    pub n_star: Option<BigInt>,
    pub stages: Vec<SearchStage>,
}

/// The `alpha` sequence found for one profile.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileAlphas {
    pub xi: String,
    #[serde(with = "serde_rational_vec")]
    pub alpha: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenericConstruction {
    pub anchor: AnchorSequence,
    pub alphas: Vec<ProfileAlphas>,
}

impl GenericConstruction {
    pub fn alphas_for(&self, xi: &[bool]) -> Option<&[Rational]> {
        let label = profile_label(xi);
        self.alphas.iter().find(|p| p.xi == label).map(|p| p.alpha.as_slice())
    }

    /// `Phi(n_T)`-style envelope for the tail beyond the last stage.
    pub fn envelope(&self, family: &SequenceFamily) -> Result<BigInt> {
        let last = self.anchor.entries.last().ok_or(Error::Validation("empty anchor".into()))?;
        tail_envelope(family, last)
    }
}

fn q_stage(k: usize, phi_prev: &BigInt) -> BigInt {
    (BigInt::one() << (64 + k)) * phi_prev
}

/// Exact `|| phi alpha / 2 - b / 2 ||`.
fn cond2_distance(phi: &BigInt, alpha: &Rational, b: &Rational) -> Rational {
    let half_alpha = alpha / Rational::from_integer(BigInt::from(2));
    let t = torus_scale(phi, &half_alpha).into_value();
    dist_to_int(&(t - b / Rational::from_integer(BigInt::from(2))))
}

fn cond3_distance(phi: &BigInt, alpha: &Rational) -> Rational {
    let half_alpha = alpha / Rational::from_integer(BigInt::from(2));
    dist_to_int(torus_scale(phi, &half_alpha).value())
}

struct Candidate {
    values: Vec<BigInt>,
}

/// Draws `u` in `[1, 2^64]`.
fn draw_u(rng: &mut ChaCha20Rng) -> BigInt {
    BigInt::from(rng.gen_range(1u128..=(1u128 << 64)))
}

/// Search for `(n_k)_{k <= K}` and `alpha_k` per profile.
pub fn search_alpha_anchor(
    family: &SequenceFamily,
    profiles: &[Vec<bool>],
    k_count: usize,
    scan_bound: u64,
    seed: u64,
) -> Result<GenericConstruction> {
    if k_count == 0 {
        return Err(Error::Validation("K must be positive".into()));
    }
    if scan_bound == 0 {
        return Err(Error::Validation("scan_bound must be positive".into()));
    }
    if profiles.is_empty() {
        return Err(Error::Validation("no profiles requested".into()));
    }
    let bs = profiles
        .iter()
        .map(|xi| {
            if xi.len() != family.len() {
                return Err(Error::Validation(format!(
                    "profile {} has length {}, family has {} members",
                    profile_label(xi),
                    xi.len(),
                    family.len()
                )));
            }
            Ok(make_profile(xi)?.b)
        })
        .collect::<Result<Vec<_>>>()?;
    let indep = family.is_asymptotically_independent()?;
    if !indep.independent {
        return Err(Error::DependentFamily {
            witness: indep.witness.unwrap_or_default().iter().map(|v| v.to_string()).collect(),
        });
    }

    let (n_star, table_indices) = if family.is_polynomial() {
        (Some(family.monotone_threshold(SEARCH_BOX)?), None)
    } else {
        let bound = family.table_bound().unwrap_or(0);
        (None, Some(family.strongly_independent_subsequence(SEARCH_BOX, bound)?))
    };

    let mut stages: Vec<SearchStage> = Vec::with_capacity(k_count);
    let mut alphas: Vec<Vec<Rational>> = vec![Vec::new(); profiles.len()];
    let mut prev_n = BigInt::one();

    for k in 1..=k_count {
        let phi_prev = family.phi_bound(&prev_n)?;
        let q = q_stage(k, &phi_prev);
        let two_q = &q * 2;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);

        // lattice of multiples of every earlier 2 Q_{k0}
        let lattice = stages.iter().fold(BigInt::one(), |acc, s| acc.lcm(&(&s.q * 2)));

        // b Q_k per profile and member; None when some b Q_k is not an integer
        let bqs: Option<Vec<Vec<BigInt>>> = bs
            .iter()
            .map(|b| {
                b.iter()
                    .map(|bl| {
                        let bq = bl * Rational::from_integer(q.clone());
                        bq.is_integer().then(|| bq.to_integer())
                    })
                    .collect()
            })
            .collect();
        let mut found: Option<(BigInt, Vec<BigInt>, usize, u64)> = None;
        let mut us: Vec<BigInt> = Vec::new();
        for draw in 1..=RETRY_CAP {
            us = profiles.iter().map(|_| draw_u(&mut rng)).collect();
            let accept = |c: &Candidate| -> bool {
                // condition (2) in integer form over 2 Q_k
                let Some(bqs) = &bqs else { return false };
                let residues: Vec<BigInt> = c.values.iter().map(|phi| phi.mod_floor(&two_q)).collect();
                for (u, bq) in us.iter().zip(bqs) {
                    for (r, bql) in residues.iter().zip(bq) {
                        let dnum = (r * u - bql).mod_floor(&two_q);
                        let d = if &dnum * 2 > two_q { &two_q - dnum } else { dnum };
                        if d * k >= two_q {
                            return false;
                        }
                    }
                }
                // condition (3), exact
                let bound = Rational::new(BigInt::one(), BigInt::from(k * k));
                for prev in &alphas {
                    for a0 in prev {
                        for phi in &c.values {
                            if cond3_distance(phi, a0) >= bound {
                                return false;
                            }
                        }
                    }
                }
                true
            };

            if k == 1 {
                // (2) is trivial at k = 1 and (3) is vacuous
                let n = match &table_indices {
                    Some(idx) => BigInt::from(idx[0]),
                    None => n_star.clone().unwrap_or_else(BigInt::one).max(BigInt::one()),
                };
                let values = family.eval_all(&n)?;
                found = Some((n, values, draw, 1));
                break;
            }

            match &table_indices {
                Some(idx) => {
                    let mut scanned = 0u64;
                    for &i in idx.iter().filter(|&&i| BigInt::from(i) > prev_n) {
                        if scanned >= scan_bound {
                            break;
                        }
                        scanned += 1;
                        let n = BigInt::from(i);
                        let c = Candidate { values: family.eval_all(&n)? };
                        if accept(&c) {
                            found = Some((n, c.values, draw, scanned));
                            break;
                        }
                    }
                }
                None => {
                    let floor = prev_n.clone().max(n_star.clone().unwrap_or_else(BigInt::one));
                    let spread = (&two_q).div_ceil(&lattice) + BigInt::from(1u32 << 16);
                    let base = &floor / &lattice + 1;
                    // independent offsets: consecutive lattice points barely move
                    // the phase of low-degree members once 2 Q_k dwarfs the lattice step
                    for scanned in 1..=scan_bound {
                        let v = &base + rng.gen_bigint_range(&BigInt::zero(), &spread);
                        let n = &lattice * &v;
                        let values = family
                            .members()
                            .iter()
                            .map(|m| match m {
                                Member::Poly(p) => p.eval(&n),
                                Member::Table(_) => unreachable!("polynomial family"),
                            })
                            .collect();
                        let c = Candidate { values };
                        if accept(&c) {
                            found = Some((n, c.values, draw, scanned));
                            break;
                        }
                    }
                }
            }
            if found.is_some() {
                break;
            }
        }

        let Some((n, values, draws, scanned)) = found else {
            return Err(Error::ScanExhausted(format!(
                "stage {k}: {RETRY_CAP} draws of {scan_bound} candidates each"
            )));
        };
        let mut stage_profiles = Vec::with_capacity(profiles.len());
        for (p, xi) in profiles.iter().enumerate() {
            let alpha = Rational::new(us[p].clone(), q.clone());
            let cond2 = values.iter().zip(&bs[p]).map(|(phi, b)| cond2_distance(phi, &alpha, b)).collect();
            let cond3 = values
                .iter()
                .map(|phi| {
                    alphas[p].iter().map(|a0| cond3_distance(phi, a0)).max().unwrap_or_else(Rational::zero)
                })
                .collect();
            alphas[p].push(alpha.clone());
            stage_profiles.push(StageProfile { xi: profile_label(xi), alpha, cond2, cond3 });
        }
        stages.push(SearchStage { k, n: n.clone(), phi_prev, q, draws, scanned, profiles: stage_profiles });
        prev_n = n;
    }

    let entries: Vec<BigInt> = stages.iter().map(|s| s.n.clone()).collect();
    let certificate = GenericCertificate {
        seed,
        scan_bound,
        profiles: profiles.iter().map(|xi| profile_label(xi)).collect(),
        n_star,
        stages,
    };
    let alphas = profiles
        .iter()
        .zip(alphas)
        .map(|(xi, alpha)| ProfileAlphas { xi: profile_label(xi), alpha })
        .collect();
    Ok(GenericConstruction {
        anchor: AnchorSequence { entries, certificate: Certificate::Generic(certificate) },
        alphas,
    })
}

impl GenericCertificate {
    /// Recomputes `Phi`, `Q_k` and every distance in conditions (1)-(3).
    pub(crate) fn verify(&self, family: &SequenceFamily, entries: &[BigInt]) -> Result<()> {
        let fail = |msg: String| Err(Error::Violation(msg));
        if self.stages.len() != entries.len() {
            return fail("stage count differs from anchor length".into());
        }
        if family.is_polynomial() {
            let n_star = family.monotone_threshold(SEARCH_BOX)?;
            if self.n_star.as_ref() != Some(&n_star) {
                return fail("recorded monotonicity threshold is wrong".into());
            }
            if entries.first().is_some_and(|n1| *n1 < n_star) {
                return fail("n_1 lies below the monotonicity threshold".into());
            }
        }
        let xis = self.profiles.iter().map(|s| parse_profile(s)).collect::<Result<Vec<_>>>()?;
        let bs = xis.iter().map(|xi| make_profile(xi).map(|p| p.b)).collect::<Result<Vec<_>>>()?;
        let mut prev_n = BigInt::one();
        let mut history: Vec<Vec<Rational>> = vec![Vec::new(); xis.len()];
        for (stage, n) in self.stages.iter().zip(entries) {
            let k = stage.k;
            if stage.n != *n {
                return fail(format!("stage {k} records a different n"));
            }
            let phi_prev = family.phi_bound(&prev_n)?;
            if stage.phi_prev != phi_prev || stage.q != q_stage(k, &phi_prev) {
                return fail(format!("stage {k}: Phi(n_(k-1)) or Q_k is wrong"));
            }
            if stage.profiles.len() != xis.len() {
                return fail(format!("stage {k}: profile count differs"));
            }
            let values = family.eval_all(n)?;
            let upper = Rational::new(BigInt::one(), (BigInt::one() << k) * &phi_prev);
            let tol2 = Rational::new(BigInt::one(), BigInt::from(k));
            let tol3 = Rational::new(BigInt::one(), BigInt::from(k * k));
            for (p, sp) in stage.profiles.iter().enumerate() {
                if sp.xi != self.profiles[p] {
                    return fail(format!("stage {k}: profile order differs"));
                }
                if !sp.alpha.is_positive() || sp.alpha > upper {
                    return fail(format!("stage {k}, profile {}: condition (1) fails", sp.xi));
                }
                let cond2: Vec<Rational> =
                    values.iter().zip(&bs[p]).map(|(phi, b)| cond2_distance(phi, &sp.alpha, b)).collect();
                if cond2 != sp.cond2 {
                    return fail(format!("stage {k}, profile {}: recorded condition (2) distances differ", sp.xi));
                }
                if k > 1 && cond2.iter().any(|d| *d >= tol2) {
                    return fail(format!("stage {k}, profile {}: condition (2) fails", sp.xi));
                }
                let cond3: Vec<Rational> = values
                    .iter()
                    .map(|phi| {
                        history[p].iter().map(|a0| cond3_distance(phi, a0)).max().unwrap_or_else(Rational::zero)
                    })
                    .collect();
                if cond3 != sp.cond3 {
                    return fail(format!("stage {k}, profile {}: recorded condition (3) distances differ", sp.xi));
                }
                if cond3.iter().any(|d| *d >= tol3) {
                    return fail(format!("stage {k}, profile {}: condition (3) fails", sp.xi));
                }
                history[p].push(sp.alpha.clone());
            }
            prev_n = n.clone();
        }
        Ok(())
    }
}

/// A lower bound on `Phi(n)` for every index the search could pick after `n`.
pub fn tail_envelope(family: &SequenceFamily, last: &BigInt) -> Result<BigInt> {
    if family.is_polynomial() {
        return family.phi_bound(last);
    }
    let bound = family.table_bound().unwrap_or(0);
    let start = last.to_u64().unwrap_or(u64::MAX).saturating_add(1);
    let mut best: Option<BigInt> = None;
    for i in start..=bound {
        let v = family.phi_bound(&BigInt::from(i))?;
        best = Some(match best {
            Some(b) if b <= v => b,
            _ => v,
        });
    }
    Ok(best.unwrap_or_else(BigInt::one))
}

/// Levels `(alpha_t, 2)`. With an envelope `Phi` the tail follows condition
/// (1): `B_{T+i} <= 1 / (2^(T+i) Phi)`; without one the measure is finite.
pub fn build_coin_measure_general(alphas: &[Rational], envelope: Option<&BigInt>) -> Result<CoinMeasure> {
    let zero = Rational::zero();
    let one = Rational::one();
    for a in alphas {
        if *a <= zero || *a >= one {
            return Err(Error::Validation(format!("alpha {} is not in (0, 1)", format_rational(a))));
        }
    }
    let levels = alphas.iter().map(|a| CoinLevel::new(a, 2)).collect::<Result<Vec<_>>>()?;
    match envelope {
        None => Ok(CoinMeasure::finite(levels)),
        Some(phi) => {
            if !phi.is_positive() {
                return Err(Error::Validation("envelope must be positive".into()));
            }
            let scale = Rational::new(BigInt::one(), (BigInt::one() << alphas.len()) * phi);
            CoinMeasure::new(levels, TailBound::geometric(scale, Rational::new(BigInt::one(), BigInt::from(2)))?)
        }
    }
}

/// Worst case of the estimate chain at one `(k, l)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainRow {
    pub k: usize,
    pub l: usize,
    pub worst: f64,
    pub bound: f64,
}

/// For every digit string `omega in {0,1}^T` and every `k <= T`, `l`:
/// `|| phi_l(n_k) f(omega) - b_l omega(k) / 2 || <= tail(k) + 1/k + (k-1)/k^2`
/// with `f(omega) = sum_t alpha_t omega(t) / 2` and
/// `tail(k) = |phi_l(n_k)| sum_{k<t<=T} alpha_t / 2`. Checked exactly.
pub fn estimate_chain(
    family: &SequenceFamily,
    xi: &[bool],
    alphas: &[Rational],
    anchor: &[BigInt],
) -> Result<Vec<ChainRow>> {
    let t_count = alphas.len();
    if t_count == 0 || t_count > 16 {
        return Err(Error::Validation(format!("estimate chain needs 1..=16 levels, got {t_count}")));
    }
    if anchor.len() < t_count {
        return Err(Error::Validation(format!("anchor has {} entries, need {t_count}", anchor.len())));
    }
    let b = make_profile(xi)?.b;
    if b.len() != family.len() {
        return Err(Error::Validation("profile length differs from family size".into()));
    }
    // common denominator of every alpha_t / 2 and b_l / 2
    let mut den = alphas.iter().fold(BigInt::from(4), |acc, a| acc.lcm(&(a.denom() * 2)));
    for bl in &b {
        den = den.lcm(&(bl.denom() * 2));
    }
    let half = Rational::new(BigInt::one(), BigInt::from(2));
    let mut rows = Vec::new();
    for (ki, n_k) in anchor.iter().enumerate().take(t_count) {
        let k = ki + 1;
        for l in 1..=family.len() {
            let phi = family.eval_member(l, n_k)?;
            // numerator of phi alpha_t / 2 mod 1 over den
            let parts: Vec<BigInt> = alphas
                .iter()
                .map(|a| {
                    let t = torus_scale(&phi, &(a * &half)).into_value();
                    (t.numer() * (&den / t.denom())).mod_floor(&den)
                })
                .collect();
            let target = &b[l - 1] * &half;
            let target_num = target.numer() * (&den / target.denom());
            let tail: Rational = alphas[k..].iter().fold(Rational::zero(), |s, a| s + a * &half);
            let bound = Rational::from_integer(phi.abs()) * tail
                + Rational::new(BigInt::one(), BigInt::from(k))
                + Rational::new(BigInt::from(k - 1), BigInt::from(k * k));
            let mut worst = BigInt::zero();
            for omega in 0u32..1 << t_count {
                let mut s = BigInt::zero();
                for (t, part) in parts.iter().enumerate() {
                    if omega >> t & 1 == 1 {
                        s += part;
                    }
                }
                if omega >> ki & 1 == 1 {
                    s -= &target_num;
                }
                let r = s.mod_floor(&den);
                let d = r.clone().min(&den - &r);
                if d > worst {
                    worst = d;
                }
            }
            let worst = Rational::new(worst, den.clone());
            if worst > bound {
                return Err(Error::Violation(format!(
                    "estimate chain fails at k {k}, l {l}: {} > {}",
                    crate::arith::to_f64(&worst),
                    crate::arith::to_f64(&bound)
                )));
            }
            rows.push(ChainRow { k, l, worst: crate::arith::to_f64(&worst), bound: crate::arith::to_f64(&bound) });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;

    fn big(n: i64) -> BigInt {
        BigInt::from(n)
    }

    #[test]
    fn single_member_stage_two() {
        let fam = SequenceFamily::from_coeffs(&[&[0, 1]]);
        let g = search_alpha_anchor(&fam, &[vec![false]], 2, 100_000, 5).unwrap();
        g.anchor.verify(&fam).unwrap();
        let a = g.alphas_for(&[false]).unwrap();
        let n2 = &g.anchor.entries[1];
        // independent recheck with full products
        let d2 = dist_to_int(&(Rational::from_integer(n2.clone()) * &a[1] / big(2) - rat(1, 2)));
        assert!(d2 < rat(1, 2));
        let d3 = dist_to_int(&(Rational::from_integer(n2.clone()) * &a[0] / big(2)));
        assert!(d3 < rat(1, 4));
    }

    #[test]
    fn stage_one_is_unconstrained() {
        let fam = SequenceFamily::from_coeffs(&[&[0, 1]]);
        let g = search_alpha_anchor(&fam, &[vec![true]], 1, 10, 1).unwrap();
        let a = &g.alphas[0].alpha[0];
        let phi0 = fam.phi_bound(&big(1)).unwrap();
        assert!(a.is_positive() && *a <= Rational::new(BigInt::one(), phi0 * 2));
        g.anchor.verify(&fam).unwrap();
    }

    #[test]
    fn dependent_family_rejected() {
        let fam = SequenceFamily::from_coeffs(&[&[0, 2], &[0, 3]]);
        assert!(matches!(
            search_alpha_anchor(&fam, &[vec![false, true]], 2, 100, 0),
            Err(Error::DependentFamily { .. })
        ));
    }

    #[test]
    fn two_members_and_chain() {
        let fam = SequenceFamily::from_coeffs(&[&[0, 1], &[0, 0, 1]]);
        let profiles = vec![vec![false, true], vec![true, false]];
        let g = search_alpha_anchor(&fam, &profiles, 4, 100_000, 7).unwrap();
        g.anchor.verify(&fam).unwrap();
        for xi in &profiles {
            let rows = estimate_chain(&fam, xi, g.alphas_for(xi).unwrap(), &g.anchor.entries).unwrap();
            assert_eq!(rows.len(), 8);
        }
        let again = search_alpha_anchor(&fam, &profiles, 4, 100_000, 7).unwrap();
        assert_eq!(g, again);
        let shorter = search_alpha_anchor(&fam, &profiles, 2, 100_000, 7).unwrap();
        assert_eq!(shorter.anchor.entries[..], g.anchor.entries[..2]);
    }

    #[test]
    fn tampering_detected() {
        let fam = SequenceFamily::from_coeffs(&[&[0, 1], &[0, 0, 1]]);
        let g = search_alpha_anchor(&fam, &[vec![true, true]], 3, 100_000, 3).unwrap();
        let mut bad = g.anchor.clone();
        if let Certificate::Generic(c) = &mut bad.certificate {
            c.stages[1].profiles[0].alpha = rat(1, 3);
        }
        assert!(bad.verify(&fam).is_err());
        let mut bad = g.anchor.clone();
        bad.entries[2] += 1;
        assert!(bad.verify(&fam).is_err());
    }

    #[test]
    fn measures() {
        let m = build_coin_measure_general(&[rat(1, 4)], None).unwrap();
        assert!((m.fourier_sigma(&big(1), 1e-12).unwrap().re() - 0.5).abs() < 1e-12);
        let m = build_coin_measure_general(&[], None).unwrap();
        assert_eq!(m.fourier_sigma(&big(5), 1e-12).unwrap().re(), 1.0);
        let m = build_coin_measure_general(&[rat(1, 2), rat(1, 4)], None).unwrap();
        assert_eq!(m.fourier_sigma(&big(2), 1e-12).unwrap().re(), 0.0);
        assert!(build_coin_measure_general(&[rat(1, 1)], None).is_err());
        let m = build_coin_measure_general(&[rat(1, 8)], Some(&big(10))).unwrap();
        assert_eq!(m.tail().sum().unwrap(), rat(1, 20));
    }

    #[test]
    fn table_family_small() {
        let t1: Vec<BigInt> = (1..=400).map(|n| big(n * n + 3 * n)).collect();
        let t2: Vec<BigInt> = (1..=400).map(|n| big(n * n * n)).collect();
        let fam = SequenceFamily::new(vec![Member::Table(t1), Member::Table(t2)]).unwrap();
        let env = tail_envelope(&fam, &big(399)).unwrap();
        assert_eq!(env, big(400 * 400 * 400 + 1));
        assert_eq!(tail_envelope(&fam, &big(400)).unwrap(), big(1));
        let g = search_alpha_anchor(&fam, &[vec![false, false]], 1, 10, 0).unwrap();
        g.anchor.verify(&fam).unwrap();
    }
}
