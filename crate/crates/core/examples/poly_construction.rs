//! The polynomial construction for {n, n^2}: anchor, coin measures and the
//! decay of the correlation error against its analytic bound.

use specmix::arith::to_f64;
use specmix::poly::{
    all_profiles, build_coin_measure_poly, choose_anchor_poly, correlation_bound, make_profile, profile_label,
    solve_rational, FactorialBase,
};
use specmix::sequences::SequenceFamily;

fn main() -> specmix::Result<()> {
    let family = SequenceFamily::from_coeffs(&[&[0, 1], &[0, 0, 1]]);
    let k = 5;
    let d = family.coefficient_matrix()?;
    let solutions = all_profiles(family.len())
        .into_iter()
        .map(|xi| {
            let x = solve_rational(&d, &make_profile(&xi)?.b)?;
            Ok((xi, x))
        })
        .collect::<specmix::Result<Vec<_>>>()?;
    let anchor = choose_anchor_poly(&family, &solutions, FactorialBase::new(), k + 1, &2.into(), 10_000)?;
    for (i, n) in anchor.entries.iter().enumerate() {
        println!("n_{} has {} digits", i + 1, n.to_string().len());
    }

    for (xi, x) in &solutions {
        let measure = build_coin_measure_poly(x, &anchor.entries, k + 1)?;
        let table = measure.verify_profile(&family, &anchor.entries, xi, k, -4..=4, 1e-9)?;
        println!("profile {}", profile_label(xi));
        for kk in 1..=k {
            for j in 1..=family.len() {
                let worst = table.rows.iter().filter(|r| r.k == kk && r.j == j).map(|r| r.error).fold(0.0, f64::max);
                let bound = to_f64(&correlation_bound(&family, j, &anchor.entries, kk)?);
                println!("  k={kk} j={j} max error {worst:.3e} bound {bound:.3e}");
            }
        }
    }
    Ok(())
}
