//! The prime-indexed family: every profile realized along one anchor.

use num_bigint::BigInt;
use specmix::prime::{build_coin_measure_prime, check_telescoping, prime_anchor, prime_exponents, profile_table};

fn main() -> specmix::Result<()> {
    let primes: Vec<BigInt> = [2, 3, 5, 7, 11, 13].into_iter().map(BigInt::from).collect();
    let spec = prime_exponents(3, &primes)?;
    println!("q = {:?}, M = {}", spec.q.iter().map(|q| q.to_string()).collect::<Vec<_>>(), spec.m);
    for row in profile_table(&spec)? {
        println!("index {} subset {:?} p {} xi {} indicator {:?}", row.n_index, row.subset, row.prime, row.xi, row.indicator);
    }
    let k = 4;
    let anchor = prime_anchor(&spec, k + 2)?;
    let mut checks = 0;
    for i in 0..spec.profile_count() {
        let measure = build_coin_measure_prime(&spec, i, &anchor.entries, k + 2)?;
        checks += check_telescoping(&spec, i, &measure, &anchor.entries, k)?;
    }
    println!("{checks} telescoping congruences hold exactly");
    Ok(())
}
