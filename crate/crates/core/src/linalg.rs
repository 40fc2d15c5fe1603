//! Small exact linear algebra over the integers and rationals.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::arith::Rational;

/// Rank by fraction-free (Bareiss) elimination.
pub fn bareiss_rank(matrix: &[Vec<BigInt>]) -> usize {
    let rows = matrix.len();
    if rows == 0 {
        return 0;
    }
    let cols = matrix[0].len();
    let mut a: Vec<Vec<BigInt>> = matrix.to_vec();
    let mut prev = BigInt::one();
    let mut rank = 0;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let Some(pivot) = (rank..rows).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(rank, pivot);
        for r in rank + 1..rows {
            for c in col + 1..cols {
                let v = &a[rank][col] * &a[r][c] - &a[r][col] * &a[rank][c];
                a[r][c] = v / &prev;
            }
            a[r][col] = BigInt::zero();
        }
        prev = a[rank][col].clone();
        rank += 1;
    }
    rank
}

/// Reduced row echelon form in place; returns the pivot columns.
pub fn rref(a: &mut [Vec<Rational>]) -> Vec<usize> {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(r, p);
        let inv = a[r][c].recip();
        for x in a[r].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..rows {
            if i != r && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for j in 0..cols {
                    let sub = &f * &a[r][j];
                    a[i][j] -= sub;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// A nonzero integer vector `y` with `y^T M = 0`, primitive and with its first
/// nonzero entry positive, or `None` when the rows of `M` are independent.
pub fn left_null_vector(matrix: &[Vec<BigInt>]) -> Option<Vec<BigInt>> {
    let rows = matrix.len();
    let cols = if rows == 0 { 0 } else { matrix[0].len() };
    // rows of the transpose
    let mut t: Vec<Vec<Rational>> = (0..cols)
        .map(|c| (0..rows).map(|r| Rational::from_integer(matrix[r][c].clone())).collect())
        .collect();
    let pivots = rref(&mut t);
    let free = (0..rows).find(|c| !pivots.contains(c))?;
    let mut y = vec![Rational::zero(); rows];
    y[free] = Rational::one();
    for (i, &p) in pivots.iter().enumerate() {
        y[p] = -t[i][free].clone();
    }
    Some(primitive(&y))
}

/// Scales a rational vector to a primitive integer vector whose first nonzero
/// entry is positive.
pub fn primitive(y: &[Rational]) -> Vec<BigInt> {
    let lcm = y.iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
    let mut ints: Vec<BigInt> = y.iter().map(|v| (v * Rational::from_integer(lcm.clone())).to_integer()).collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, v| acc.gcd(v));
    if !g.is_zero() {
        for v in ints.iter_mut() {
            *v = &*v / &g;
        }
    }
    if ints.iter().find(|v| !v.is_zero()).is_some_and(|v| v.is_negative()) {
        for v in ints.iter_mut() {
            *v = -&*v;
        }
    }
    ints
}
