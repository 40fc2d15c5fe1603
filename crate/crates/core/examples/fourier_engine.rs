//! Certified Fourier coefficients of a small coin measure.

use num_bigint::BigInt;
use specmix::arith::rat;
use specmix::coin::{CoinLevel, CoinMeasure, TailBound};

fn main() -> specmix::Result<()> {
    let levels = vec![CoinLevel::new(&rat(1, 3), 2)?, CoinLevel::new(&rat(1, 40), 3)?];
    let measure = CoinMeasure::finite(levels.clone());

    println!("{:>4} {:>22} {:>12}", "m", "sigma_hat(m)", "radius");
    for m in [0i64, 1, 2, 3, 7, 40, 120, 1000] {
        let v = measure.fourier_sigma(&BigInt::from(m), 1e-9)?;
        println!("{m:>4} {:>22.16} {:>12.3e}", v.re(), v.radius);
    }
    for big_m in [16, 64, 256] {
        println!("wiener average M={big_m}: {:.6}", measure.wiener_average(big_m, 1e-9)?);
    }

    // unmaterialized levels below 10^-12, 10^-13, ...: still certified at small m
    let tail = TailBound::geometric(rat(1, 1_000_000_000_000), rat(1, 10))?;
    let infinite = CoinMeasure::new(levels, tail)?;
    let v = infinite.fourier_sigma(&BigInt::from(7), 1e-9)?;
    println!("with tail: sigma_hat(7) = {:.16} +- {:.1e}", v.re(), v.radius);
    Ok(())
}
