//! Wiener averages of the polynomial-construction measures, the spectral
//! proxy for continuity.

use specmix::poly::{
    all_profiles, build_coin_measure_poly, choose_anchor_poly, make_profile, profile_label, solve_rational,
    FactorialBase,
};
use specmix::sequences::SequenceFamily;

fn main() -> specmix::Result<()> {
    let family = SequenceFamily::from_coeffs(&[&[0, 1], &[0, 0, 1]]);
    let d = family.coefficient_matrix()?;
    let solutions = all_profiles(2)
        .into_iter()
        .map(|xi| {
            let x = solve_rational(&d, &make_profile(&xi)?.b)?;
            Ok((xi, x))
        })
        .collect::<specmix::Result<Vec<_>>>()?;
    let anchor = choose_anchor_poly(&family, &solutions, FactorialBase::new(), 4, &2.into(), 10_000)?;
    for (xi, x) in &solutions {
        let measure = build_coin_measure_poly(x, &anchor.entries, 4)?;
        let averages = [16, 64, 256, 1024]
            .iter()
            .map(|&m| measure.wiener_average(m, 1e-9))
            .collect::<specmix::Result<Vec<_>>>()?;
        println!("{}: {:?}", profile_label(xi), averages.iter().map(|a| format!("{a:.5}")).collect::<Vec<_>>());
    }
    Ok(())
}
