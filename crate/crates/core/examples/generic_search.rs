//! Randomized search for frequencies and an anchor sequence, followed by the
//! exact certificate check and the digit-sequence estimate chain.

use specmix::generic::{estimate_chain, search_alpha_anchor};
use specmix::poly::parse_profile;
use specmix::sequences::SequenceFamily;

fn main() -> specmix::Result<()> {
    let family = SequenceFamily::from_coeffs(&[&[0, 1], &[0, 0, 1]]);
    let profiles = vec![parse_profile("01")?, parse_profile("10")?];
    let found = search_alpha_anchor(&family, &profiles, 6, 100_000, 7)?;
    found.anchor.verify(&family)?;
    for (i, n) in found.anchor.entries.iter().enumerate() {
        println!("n_{} = {} ({} digits)", i + 1, if n.bits() < 64 { n.to_string() } else { "..".into() }, n.to_string().len());
    }
    for pa in &found.alphas {
        let xi = parse_profile(&pa.xi)?;
        let rows = estimate_chain(&family, &xi, &pa.alpha, &found.anchor.entries)?;
        let slack = rows.iter().map(|r| r.bound - r.worst).fold(f64::INFINITY, f64::min);
        println!("profile {}: estimate chain holds, smallest slack {slack:.3e}", pa.xi);
    }
    Ok(())
}
