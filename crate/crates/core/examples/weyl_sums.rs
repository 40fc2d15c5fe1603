//! Normalized Weyl sums along {n, n^2} for random 64-bit rationals.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use specmix::arith::rat;
use specmix::sequences::SequenceFamily;
use specmix::weyl::{equidistribution_report, random_alpha, weyl_sum};

fn main() -> specmix::Result<()> {
    let family = SequenceFamily::from_coeffs(&[&[0, 1], &[0, 0, 1]]);
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for _ in 0..5 {
        let alpha = random_alpha(&mut rng);
        let r = equidistribution_report(&family, std::slice::from_ref(&alpha), 10_000, 3)?;
        println!("alpha = {alpha}: max |S| {:.4}, discrepancy {:.4}", r.max_abs, r.discrepancy);
    }
    // a full period of 1/7 cancels exactly
    let s = weyl_sum(&family, &[1, 0], &rat(1, 7), 7 * 100)?;
    println!("alpha = 1/7 over 100 periods: |S| = {:.2e}", s.norm());
    Ok(())
}
