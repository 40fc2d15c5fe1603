//! Weyl sums `S(M) = (1/M) sum_{r=1}^{M} e(sum_j a_j phi_j(r) alpha)` and an
//! equidistribution report for the joint orbit `(phi_j(r) alpha_i)`.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{to_f64, torus_scale, unit_phase, Rational};
use crate::sequences::{box_vectors, SequenceFamily};
use crate::{Error, Result};

/// Compensated complex sum.
#[derive(Default)]
struct Neumaier {
    re: (f64, f64),
    im: (f64, f64),
}

fn neumaier_add(acc: &mut (f64, f64), x: f64) {
    let t = acc.0 + x;
    if acc.0.abs() >= x.abs() {
        acc.1 += (acc.0 - t) + x;
    } else {
        acc.1 += (x - t) + acc.0;
    }
    acc.0 = t;
}

impl Neumaier {
    fn add(&mut self, z: Complex64) {
        neumaier_add(&mut self.re, z.re);
        neumaier_add(&mut self.im, z.im);
    }

    fn total(&self) -> Complex64 {
        Complex64::new(self.re.0 + self.re.1, self.im.0 + self.im.1)
    }
}

/// `e(x / q)` for `0 <= x < q < 2^64`, quarter turns split off in integers.
fn phase_u64(x: u64, q: u64) -> Complex64 {
    let four_x = 4 * x as u128;
    let q = q as u128;
    let turns = (four_x / q) as u8;
    let rem = four_x % q; // remainder angle is rem / (4q) turns
    let (s, c) = if rem == 0 {
        (0.0, 1.0)
    } else if 2 * rem > q {
        let co = (q - rem) as f64 / (4.0 * q as f64);
        let (s, c) = (std::f64::consts::TAU * co).sin_cos();
        (c, s)
    } else {
        (std::f64::consts::TAU * (rem as f64 / (4.0 * q as f64))).sin_cos()
    };
    match turns & 3 {
        0 => Complex64::new(c, s),
        1 => Complex64::new(-s, c),
        2 => Complex64::new(-c, -s),
        _ => Complex64::new(s, -c),
    }
}

/// `alpha = p/q` with `q < 2^64`, as `(p mod q, q)`.
fn small_alpha(alpha: &Rational) -> Option<(u64, u64)> {
    let q = alpha.denom().to_u64()?;
    let p = alpha.numer().mod_floor_u64(q);
    Some((p, q))
}

trait ModFloorU64 {
    fn mod_floor_u64(&self, q: u64) -> u64;
}

impl ModFloorU64 for BigInt {
    fn mod_floor_u64(&self, q: u64) -> u64 {
        use num_integer::Integer;
        self.mod_floor(&BigInt::from(q)).to_u64().expect("reduced below q")
    }
}

/// `phi_j(r)` for `r = 1..=M` as `i128` when every value fits.
fn small_values(family: &SequenceFamily, m: u64) -> Result<Option<Vec<Vec<i128>>>> {
    let mut out = Vec::with_capacity(family.len());
    for j in 1..=family.len() {
        let mut col = Vec::with_capacity(m as usize);
        for r in 1..=m {
            let v = family.eval_member(j, &BigInt::from(r))?;
            match v.to_i128() {
                Some(x) if x.unsigned_abs() < 1 << 100 => col.push(x),
                _ => return Ok(None),
            }
        }
        out.push(col);
    }
    Ok(Some(out))
}

fn check_m(m: u64) -> Result<()> {
    if m == 0 {
        return Err(Error::Validation("M must be at least 1".into()));
    }
    Ok(())
}

fn check_len(family: &SequenceFamily, a: &[i64]) -> Result<()> {
    if a.len() != family.len() {
        return Err(Error::Validation(format!("a has {} entries, family has {}", a.len(), family.len())));
    }
    Ok(())
}

/// `(1/M) sum_{r=1}^{M} e(sum_j a_j phi_j(r) alpha)`; phases are reduced
/// exactly before conversion to floating point.
pub fn weyl_sum(family: &SequenceFamily, a: &[i64], alpha: &Rational, m: u64) -> Result<Complex64> {
    check_m(m)?;
    check_len(family, a)?;
    let values = small_values(family, m)?;
    Ok(joint_sum(family, &[a.to_vec()], std::slice::from_ref(alpha), m, values.as_deref())?)
}

/// `a[i][j]` multiplies `phi_j(r) alpha_i`.
fn joint_sum(
    family: &SequenceFamily,
    a: &[Vec<i64>],
    alphas: &[Rational],
    m: u64,
    values: Option<&[Vec<i128>]>,
) -> Result<Complex64> {
    let smalls: Option<Vec<(u64, u64)>> = alphas.iter().map(small_alpha).collect();
    let mut acc = Neumaier::default();
    match (values, smalls) {
        (Some(values), Some(smalls)) => {
            for r in 0..m as usize {
                let mut z = Complex64::new(1.0, 0.0);
                for (ai, &(p, q)) in a.iter().zip(&smalls) {
                    let mut c: i128 = 0;
                    for (aij, col) in ai.iter().zip(values) {
                        c += *aij as i128 * col[r];
                    }
                    let cm = c.rem_euclid(q as i128) as u128;
                    let x = (cm * p as u128 % q as u128) as u64;
                    if x != 0 {
                        z *= phase_u64(x, q);
                    }
                }
                acc.add(z);
            }
        }
        _ => {
            for r in 1..=m {
                let phis = family.eval_all(&BigInt::from(r))?;
                let mut z = Complex64::new(1.0, 0.0);
                for (ai, alpha) in a.iter().zip(alphas) {
                    let c: BigInt = ai.iter().zip(&phis).map(|(x, p)| p * *x).sum();
                    z *= unit_phase(&torus_scale(&c, alpha));
                }
                acc.add(z);
            }
        }
    }
    Ok(acc.total() / m as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeylEntry {
    /// Row-major `a[i][j]` for `alpha_i`, `phi_j`.
    pub a: Vec<i64>,
    pub re: f64,
    pub im: f64,
    pub abs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeylReport {
    pub m: u64,
    /// Every nonzero `a` in the box, in lexicographic order.
    pub sums: Vec<WeylEntry>,
    pub max_abs: f64,
    /// Largest one-dimensional star discrepancy over the coordinates
    /// `phi_j(r) alpha_i mod 1`.
    pub discrepancy: f64,
}

/// All Weyl sums over `||a||_inf <= coeff_box` for the joint phase vector,
/// plus the orbit's coordinate-wise discrepancy.
pub fn equidistribution_report(
    family: &SequenceFamily,
    alphas: &[Rational],
    m: u64,
    coeff_box: i64,
) -> Result<WeylReport> {
    check_m(m)?;
    if alphas.is_empty() || coeff_box < 1 {
        return Err(Error::Validation("need at least one alpha and a positive box".into()));
    }
    let n = family.len();
    let dim = n * alphas.len();
    let values = small_values(family, m)?;
    let half = box_vectors(dim, coeff_box);
    let computed: Vec<(Vec<i64>, Complex64)> = half
        .into_par_iter()
        .map(|flat| {
            let a: Vec<Vec<i64>> = flat.chunks(n).map(|c| c.to_vec()).collect();
            joint_sum(family, &a, alphas, m, values.as_deref()).map(|z| (flat, z))
        })
        .collect::<Result<_>>()?;
    let mut sums: Vec<WeylEntry> = Vec::with_capacity(2 * computed.len());
    for (a, z) in computed {
        let neg: Vec<i64> = a.iter().map(|x| -x).collect();
        let abs = z.norm().min(1.0);
        sums.push(WeylEntry { a, re: z.re, im: z.im, abs });
        sums.push(WeylEntry { a: neg, re: z.re, im: -z.im, abs });
    }
    sums.sort_by(|x, y| x.a.cmp(&y.a));
    let max_abs = sums.iter().map(|e| e.abs).fold(0.0, f64::max);

    let mut discrepancy: f64 = 0.0;
    for alpha in alphas {
        for j in 1..=n {
            let mut xs: Vec<f64> = (1..=m)
                .into_par_iter()
                .map(|r| {
                    let v = family.eval_member(j, &BigInt::from(r))?;
                    Ok(to_f64(torus_scale(&v, alpha).value()))
                })
                .collect::<Result<_>>()?;
            discrepancy = discrepancy.max(star_discrepancy(&mut xs));
        }
    }
    Ok(WeylReport { m, sums, max_abs, discrepancy })
}

/// `D*_M = max_i max(i/M - x_(i), x_(i) - (i-1)/M)` for points of `[0, 1)`.
pub fn star_discrepancy(xs: &mut [f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    let m = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| ((i + 1) as f64 / m - x).max(x - i as f64 / m))
        .fold(0.0, f64::max)
}

/// Uniform random `alpha = u / q` with a random odd 64-bit denominator.
pub fn random_alpha(rng: &mut impl rand::Rng) -> Rational {
    let q = rng.gen_range(1u64 << 62..=u64::MAX) | 1;
    let p = rng.gen_range(1..q);
    Rational::new(BigInt::from(p), BigInt::from(q))
}

/// Whether `alpha` is small enough for the machine-integer path.
pub fn is_fast(alpha: &Rational) -> bool {
    alpha.denom().to_u64().is_some() && !alpha.numer().is_negative() || alpha.is_zero()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{rat, torus_reduce};
    use crate::sequences::IntPolynomial;
    use rand::SeedableRng;

    fn lin() -> SequenceFamily {
        SequenceFamily::from_coeffs(&[&[0, 1]])
    }

    #[test]
    fn examples() {
        assert!(weyl_sum(&lin(), &[1], &rat(1, 2), 2).unwrap().norm() < 1e-15);
        assert_eq!(weyl_sum(&lin(), &[1], &rat(0, 1), 10).unwrap(), Complex64::new(1.0, 0.0));
        assert!(weyl_sum(&lin(), &[1], &rat(1, 4), 4).unwrap().norm() < 1e-15);
        assert!(weyl_sum(&lin(), &[1], &rat(1, 4), 0).is_err());
    }

    #[test]
    fn fast_matches_bigint_path() {
        let fam = SequenceFamily::from_coeffs(&[&[0, 1], &[0, 0, 1]]);
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(3);
        for _ in 0..5 {
            let alpha = random_alpha(&mut rng);
            let fast = joint_sum(&fam, &[vec![2, -3]], std::slice::from_ref(&alpha), 300, small_values(&fam, 300).unwrap().as_deref()).unwrap();
            let slow = joint_sum(&fam, &[vec![2, -3]], std::slice::from_ref(&alpha), 300, None).unwrap();
            assert!((fast - slow).norm() < 1e-13);
        }
    }

    #[test]
    fn phase_u64_matches_exact() {
        for (x, q) in [(1u64, 3u64), (5, 8), (7, 8), (123456789, 1000000007), (u64::MAX - 5, u64::MAX)] {
            let want = unit_phase(&torus_reduce(&Rational::new(BigInt::from(x), BigInt::from(q))));
            assert!((phase_u64(x, q) - want).norm() < 1e-15);
        }
    }

    #[test]
    fn degenerate_and_periodic() {
        let r = equidistribution_report(&lin(), &[rat(0, 1)], 50, 2).unwrap();
        assert!(r.sums.iter().all(|e| (e.abs - 1.0).abs() < 1e-15));
        assert_eq!(r.sums.len(), 4);
        let r = equidistribution_report(&lin(), &[rat(1, 5)], 5 * 7, 4).unwrap();
        for e in &r.sums {
            assert!(e.abs < 1e-12, "{:?}", e);
        }
    }

    #[test]
    fn random_alpha_small_sums() {
        let fam = SequenceFamily::from_coeffs(&[&[0, 1], &[0, 0, 1]]);
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(11);
        let alpha = random_alpha(&mut rng);
        let r = equidistribution_report(&fam, &[alpha], 10_000, 3).unwrap();
        assert!(r.max_abs < 0.05, "{}", r.max_abs);
        assert!(r.discrepancy < 0.05);
    }

    #[test]
    fn residue_class_averaging() {
        // S over r = 1..R L equals the average of the sums along r = R n + s
        let fam = SequenceFamily::from_coeffs(&[&[0, 1], &[0, 0, 1]]);
        let alpha = rat(3, 17);
        let (rr, l) = (4u64, 17u64);
        let full = weyl_sum(&fam, &[1, 2], &alpha, rr * l).unwrap();
        let mut avg = Complex64::new(0.0, 0.0);
        for s in 1..=rr as i64 {
            // phi(R n + s - R) for n = 1..L
            let r = rr as i64;
            let shifted = SequenceFamily::polynomials(vec![
                IntPolynomial::from_i64(&[s - r, r]),
                IntPolynomial::from_i64(&[(s - r) * (s - r), 2 * r * (s - r), r * r]),
            ])
            .unwrap();
            avg += weyl_sum(&shifted, &[1, 2], &alpha, l).unwrap() / rr as f64;
        }
        assert!((full - avg).norm() < 1e-13);
    }

    #[test]
    fn discrepancy_of_grid() {
        let mut xs: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        assert!((star_discrepancy(&mut xs) - 0.1).abs() < 1e-15);
    }
}
