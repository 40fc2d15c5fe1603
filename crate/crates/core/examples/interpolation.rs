//! Gluing grid automorphisms with dyadic weights and checking the exact
//! convex identity for correlations.

use num_bigint::BigInt;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use specmix::arith::{format_rational, rat};
use specmix::grid::{cyclic_permutation, glue, verify_convex_identity, verify_metric_bound, GridAutomorphism};

fn main() -> specmix::Result<()> {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let lambda = vec![rat(1, 4), rat(1, 2)];
    let rank = 2;
    let pieces = (0..3).map(|_| GridAutomorphism::random(6, &mut rng)).collect::<specmix::Result<Vec<_>>>()?;
    let glued = glue(&lambda, &pieces, rank)?;
    println!("glued map lives on 2^{} cells", glued.resolution());
    let n_list: Vec<BigInt> = (1..=16).map(BigInt::from).collect();
    let residual = verify_convex_identity(&glued, &pieces, &lambda, rank, rank, &n_list)?;
    println!("convex identity residual: {}", format_rational(&residual));
    let reference = cyclic_permutation(rank, 6)?;
    let bound = verify_metric_bound(&reference, &glued, &pieces, &lambda, rank)?;
    println!("metric bound: {} <= {} ({})", format_rational(&bound.lhs), format_rational(&bound.rhs), bound.holds);
    Ok(())
}
