//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use specmix::arith::{dist_to_int, rat, torus_reduce, torus_scale, Rational};
use specmix::cli::{parse_config, run, CommandName, Flags};
use specmix::coin::CoinMeasure;
use specmix::generic::{estimate_chain, search_alpha_anchor, GenericConstruction};
use specmix::grid::{glue, verify_convex_identity, verify_metric_bound, cyclic_permutation, GridAutomorphism};
use specmix::poly::{
    all_profiles, build_coin_measure_poly, choose_anchor_poly, make_profile, parse_profile, profile_label,
    solve_rational, AnchorSequence, FactorialBase,
};
use specmix::prime::{build_coin_measure_prime, character_average, prime_anchor, prime_exponents};
use specmix::sequences::{Member, SequenceFamily};
use specmix::weyl::{equidistribution_report, random_alpha, weyl_sum};

use common::{measure_of, random_levels, PairOracle};

const EPS: f64 = 1e-9;
const SEARCH_SEED: u64 = 7;
const GRID_SEED: u64 = 2024;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn squares() -> SequenceFamily {
    SequenceFamily::from_coeffs(&[&[0, 1], &[0, 0, 1]])
}

fn exact(x: f64) -> Rational {
    Rational::from_float(x).unwrap_or_else(|| panic!("not finite: {x}"))
}

// ---------------------------------------------------------------- 1

fn character_averages() -> Outcome {
    let cases: [(usize, Vec<i64>); 2] = [(2, vec![2, 3]), (3, vec![2, 3, 5, 7, 11, 13])];
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (n, primes) in cases {
        let primes: Vec<BigInt> = primes.into_iter().map(BigInt::from).collect();
        let spec = match prime_exponents(n, &primes) {
            Ok(s) => s,
            Err(e) => return outcome(false, format!("N={n}: {e}")),
        };
        for idx in 0..spec.profile_count() {
            let members = spec.subset_members(idx);
            let xi = spec.xi(idx);
            for j in 1..=n {
                let inside = members.contains(&j);
                if inside == xi[j - 1] {
                    return outcome(false, format!("N={n} index {idx}: xi disagrees with the subset at j={j}"));
                }
                let v = match character_average(&spec.q[j - 1], &spec.prime_for(idx), spec.c(idx)) {
                    Ok(v) => v,
                    Err(e) => return outcome(false, e.to_string()),
                };
                worst = worst.max((v - if inside { 1.0 } else { 0.0 }).abs());
                checked += 1;
            }
        }
    }
    outcome(worst <= 1e-12, format!("{checked} averages, max deviation {worst:.1e} (tol 1e-12)"))
}

// ---------------------------------------------------------------- 2

fn telescoping() -> Outcome {
    let spec = prime_exponents(2, &[BigInt::from(2), BigInt::from(3)]).unwrap();
    let (k_max, t_count) = (5usize, 8usize);
    let anchor = prime_anchor(&spec, t_count).unwrap();
    let family = spec.family();
    let mut checks = 0;
    for idx in 0..spec.profile_count() {
        let measure = build_coin_measure_prime(&spec, idx, &anchor.entries, t_count).unwrap();
        let p = spec.prime_for(idx);
        for k in 1..=k_max {
            for l in 1..=family.len() {
                let phi = family.eval_member(l, &anchor.entries[k - 1]).unwrap();
                for (t, level) in measure.levels().iter().enumerate().take(k) {
                    let got = torus_scale(&phi, level.frequency().value());
                    let want = if t + 1 < k {
                        Rational::zero()
                    } else {
                        torus_reduce(&Rational::new(spec.q[l - 1].clone(), p.clone())).into_value()
                    };
                    if got.value() != &want {
                        return outcome(false, format!("index {idx}, l={l}, k={k}, t={}: {} != {}", t + 1, got.value(), want));
                    }
                    checks += 1;
                }
            }
        }
    }
    let digits = anchor.entries[k_max - 1].to_string().len();
    outcome(true, format!("{checks} congruences exact; n_5 has {digits} digits"))
}

// ---------------------------------------------------------------- 3

struct PolyRun {
    family: SequenceFamily,
    anchor: AnchorSequence,
    measures: Vec<(Vec<bool>, CoinMeasure)>,
}

fn poly_run(k: usize) -> PolyRun {
    let family = squares();
    let d = family.coefficient_matrix().unwrap();
    let solutions: Vec<(Vec<bool>, Vec<Rational>)> = all_profiles(2)
        .into_iter()
        .map(|xi| {
            let x = solve_rational(&d, &make_profile(&xi).unwrap().b).unwrap();
            (xi, x)
        })
        .collect();
    let anchor = choose_anchor_poly(&family, &solutions, FactorialBase::new(), k + 1, &BigInt::from(2), 10_000).unwrap();
    let measures = solutions
        .iter()
        .map(|(xi, x)| (xi.clone(), build_coin_measure_poly(x, &anchor.entries, k + 1).unwrap()))
        .collect();
    PolyRun { family, anchor, measures }
}

/// `2 (sum_l |a_{j,l}|) 2 n_1 / (n_k - 1)`, from the coefficients directly.
fn decay_bound(family: &SequenceFamily, j: usize, anchor: &[BigInt], k: usize) -> Rational {
    let Member::Poly(p) = &family.members()[j - 1] else { unreachable!() };
    let abs_sum: BigInt = p.coefficients().iter().map(|c| c.abs()).sum();
    Rational::new(abs_sum * 4 * &anchor[0], &anchor[k - 1] - 1)
}

fn poly_decay(run: &PolyRun) -> Outcome {
    let k = 6;
    let two_eps = exact(2.0 * EPS);
    let mut rows = 0;
    let mut worst_last = 0.0f64;
    for (xi, measure) in &run.measures {
        let table = match measure.verify_profile(&run.family, &run.anchor.entries, xi, k, -4..=4, EPS) {
            Ok(t) => t,
            Err(e) => return outcome(false, format!("profile {}: {e}", profile_label(xi))),
        };
        for row in &table.rows {
            let bound = decay_bound(&run.family, row.j, &run.anchor.entries, row.k);
            if exact(row.error) > bound + &two_eps {
                return outcome(
                    false,
                    format!("profile {} j={} k={} m={}: e = {:.3e} above bound", profile_label(xi), row.j, row.k, row.m, row.error),
                );
            }
            if row.k == k {
                worst_last = worst_last.max(row.error);
            }
            rows += 1;
        }
    }
    outcome(
        worst_last < 1e-3,
        format!("{rows} rows within the decay bound; max e at k=6 is {worst_last:.1e} (tol 1e-3)"),
    )
}

// ---------------------------------------------------------------- 4

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let levels = random_levels(&mut rng, 6, 3, 64);
        let oracle = PairOracle::new(&levels);
        let measure = measure_of(&levels);
        for m in -50i64..=50 {
            let got = match measure.fourier_sigma(&BigInt::from(m), 1e-12) {
                Ok(v) => v.re(),
                Err(e) => return outcome(false, e.to_string()),
            };
            worst = worst.max((got - oracle.sigma(m)).abs());
        }
    }
    outcome(worst <= 1e-10, format!("50 measures, |m| <= 50, max deviation {worst:.1e} (tol 1e-10)"))
}

// ---------------------------------------------------------------- 5

/// Conditions (1)-(3) recomputed from scratch with rational arithmetic.
fn recheck_conditions(family: &SequenceFamily, g: &GenericConstruction) -> Result<usize, String> {
    let entries = &g.anchor.entries;
    let mut checks = 0;
    for pa in &g.alphas {
        let xi = parse_profile(&pa.xi).map_err(|e| e.to_string())?;
        let b = make_profile(&xi).map_err(|e| e.to_string())?.b;
        let mut prev = BigInt::one();
        for (i, n) in entries.iter().enumerate() {
            let k = i + 1;
            if n <= &prev && k > 1 {
                return Err(format!("n_{k} not increasing"));
            }
            let phi_prev: BigInt =
                (1..=family.len()).map(|l| family.eval_member(l, &prev).unwrap().abs()).max().unwrap() + 1;
            let alpha = &pa.alpha[i];
            let cap = Rational::new(BigInt::one(), BigInt::from(2).pow(k as u32) * phi_prev);
            if !(alpha > &Rational::zero() && alpha <= &cap) {
                return Err(format!("profile {} k={k}: condition (1)", pa.xi));
            }
            let half = rat(1, 2);
            for l in 1..=family.len() {
                let phi = Rational::from_integer(family.eval_member(l, n).unwrap());
                let d2 = dist_to_int(&(&phi * alpha * &half - &b[l - 1] * &half));
                if d2 >= rat(1, k as i64) {
                    return Err(format!("profile {} k={k} l={l}: condition (2)", pa.xi));
                }
                for a0 in &pa.alpha[..i] {
                    if dist_to_int(&(&phi * a0 * &half)) >= rat(1, (k * k) as i64) {
                        return Err(format!("profile {} k={k} l={l}: condition (3)", pa.xi));
                    }
                }
                checks += 1;
            }
            prev = n.clone();
        }
    }
    Ok(checks)
}

fn certificates() -> Outcome {
    let family = squares();
    let profiles = vec![parse_profile("01").unwrap(), parse_profile("10").unwrap()];
    let short = match search_alpha_anchor(&family, &profiles, 4, 100_000, SEARCH_SEED) {
        Ok(g) => g,
        Err(e) => return outcome(false, format!("K=4 search: {e}")),
    };
    if let Err(e) = short.anchor.verify(&family) {
        return outcome(false, format!("certificate: {e}"));
    }
    let checks = match recheck_conditions(&family, &short) {
        Ok(c) => c,
        Err(e) => return outcome(false, e),
    };
    let long = match search_alpha_anchor(&family, &profiles, 10, 100_000, SEARCH_SEED) {
        Ok(g) => g,
        Err(e) => return outcome(false, format!("T=10 search: {e}")),
    };
    if long.anchor.entries[..4] != short.anchor.entries[..] {
        return outcome(false, "T=10 run does not extend the K=4 anchor");
    }
    let mut slack = f64::INFINITY;
    for pa in &long.alphas {
        let xi = parse_profile(&pa.xi).unwrap();
        if short.alphas_for(&xi) != Some(&pa.alpha[..4]) {
            return outcome(false, "T=10 run does not extend the K=4 frequencies");
        }
        match estimate_chain(&family, &xi, &pa.alpha, &long.anchor.entries) {
            Ok(rows) => {
                for r in rows {
                    slack = slack.min(r.bound - r.worst);
                }
            }
            Err(e) => return outcome(false, format!("estimate chain, profile {}: {e}", pa.xi)),
        }
    }
    outcome(
        true,
        format!("{checks} exact condition checks at K=4; chain holds on all 2^10 strings, min slack {slack:.3}"),
    )
}

// ---------------------------------------------------------------- 6

fn weyl_sums() -> Outcome {
    let family = squares();
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let alpha = random_alpha(&mut rng);
        match equidistribution_report(&family, std::slice::from_ref(&alpha), 10_000, 3) {
            Ok(r) => worst = worst.max(r.max_abs),
            Err(e) => return outcome(false, e.to_string()),
        }
    }
    let mut periodic = 0.0f64;
    for q in [2i64, 3, 5, 7, 97] {
        for a1 in -3i64..=3 {
            if a1 % q == 0 {
                continue;
            }
            let s = weyl_sum(&family, &[a1, 0], &rat(1, q), (q * 50) as u64).unwrap();
            periodic = periodic.max(s.norm());
        }
    }
    outcome(
        worst < 0.05 && periodic < 1e-12,
        format!("max |S(10^4)| {worst:.4} (tol 0.05); periodic |S(qL)| {periodic:.1e} (tol 1e-12)"),
    )
}

// ---------------------------------------------------------------- 7

/// `mu(E cap T^-n F)` by following every cell.
fn cell_correlation(t: &GridAutomorphism, rank: u32, e: u64, f: u64, n: usize) -> Rational {
    let g = t.resolution();
    let perm = t.perm();
    let shift = g - rank;
    let mut hits = 0i64;
    for x in 0..perm.len() as u64 {
        if x >> shift != e {
            continue;
        }
        let mut y = x as usize;
        for _ in 0..n {
            y = perm[y] as usize;
        }
        if (y as u64) >> shift == f {
            hits += 1;
        }
    }
    rat(hits, 1i64 << g)
}

fn convex_identity() -> Outcome {
    let cases = [(vec![rat(1, 2)], vec![rat(1, 2), rat(1, 2)]), (vec![rat(1, 4), rat(1, 2)], vec![rat(1, 4), rat(1, 4), rat(1, 2)])];
    let n_list: Vec<BigInt> = (1..=16).map(BigInt::from).collect();
    let rank = 2;
    let mut rng = ChaCha20Rng::seed_from_u64(GRID_SEED);
    let mut trials = 0;
    let mut min_slack: Option<Rational> = None;
    for (lambda, delta) in &cases {
        let reference = cyclic_permutation(rank, 6).unwrap();
        for trial in 0..100 {
            let pieces: Vec<GridAutomorphism> =
                (0..delta.len()).map(|_| GridAutomorphism::random(6, &mut rng).unwrap()).collect();
            let glued = glue(lambda, &pieces, rank).unwrap();
            let residual = verify_convex_identity(&glued, &pieces, lambda, rank, rank, &n_list).unwrap();
            if !residual.is_zero() {
                return outcome(false, format!("lambda {lambda:?} trial {trial}: residual {residual}"));
            }
            let bound = verify_metric_bound(&reference, &glued, &pieces, lambda, rank).unwrap();
            if !bound.holds || bound.slack.is_negative() {
                return outcome(false, format!("lambda {lambda:?} trial {trial}: metric bound fails"));
            }
            min_slack = Some(match min_slack {
                Some(s) if s <= bound.slack => s,
                _ => bound.slack.clone(),
            });
            // independent cell-by-cell recount on the first trials
            if trial < 10 {
                for n in [1usize, 2, 5, 16] {
                    for e in 0..4 {
                        for f in 0..4 {
                            let lhs = cell_correlation(&glued, rank, e, f, n);
                            let rhs = pieces
                                .iter()
                                .zip(delta)
                                .fold(Rational::zero(), |acc, (p, d)| acc + d * cell_correlation(p, rank, e, f, n));
                            if lhs != rhs {
                                return outcome(false, format!("recount differs at n={n}, E={e}, F={f}"));
                            }
                        }
                    }
                }
            }
            trials += 1;
        }
    }
    outcome(
        true,
        format!("{trials} trials with residual exactly 0; metric bound holds, min slack {}", min_slack.unwrap()),
    )
}

// ---------------------------------------------------------------- 8

fn spectral_sanity(run: &PolyRun) -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let mut measures: Vec<CoinMeasure> = run.measures.iter().map(|(_, m)| m.clone()).collect();
    for _ in 0..20 {
        measures.push(measure_of(&random_levels(&mut rng, 6, 3, 64)));
    }
    for m in &measures {
        let zero = m.fourier_sigma(&BigInt::zero(), EPS).unwrap();
        if zero.re() != 1.0 || zero.radius != 0.0 {
            return outcome(false, "sigma_hat(0) is not exactly 1");
        }
        for _ in 0..100 {
            let k = BigInt::from(rng.gen_range(1..1_000_000i64));
            let (Ok(a), Ok(b)) = (m.fourier_sigma(&k, EPS), m.fourier_sigma(&-&k, EPS)) else {
                return outcome(false, format!("evaluation failed at m={k}"));
            };
            if (a.re() - b.re()).abs() > 2.0 * a.radius.max(b.radius) + f64::MIN_POSITIVE && a.re() != b.re() {
                return outcome(false, format!("asymmetric at m={k}"));
            }
            if a.re() < 0.0 || a.re() > 1.0 + a.radius {
                return outcome(false, format!("out of range at m={k}"));
            }
        }
    }
    let target = parse_profile("10").unwrap();
    let (_, instance) = run.measures.iter().find(|(xi, _)| *xi == target).unwrap();
    let averages: Vec<f64> = [16, 64, 256].iter().map(|&big_m| instance.wiener_average(big_m, EPS).unwrap()).collect();
    let decreasing = averages.windows(2).all(|w| w[1] < w[0]);
    outcome(
        decreasing,
        format!(
            "sigma_hat(0), symmetry and range hold on {} measures; Wiener averages M=16,64,256 for xi=(1,0): {:.5}, {:.5}, {:.5}{}",
            measures.len(),
            averages[0],
            averages[1],
            averages[2],
            if decreasing { "" } else { " (not strictly decreasing)" }
        ),
    )
}

// ---------------------------------------------------------------- 9

fn run_cli(command: CommandName, config: &str, dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    let path = dir.join("config.json");
    fs::write(&path, config).map_err(|e| e.to_string())?;
    let out = dir.join("out");
    let flags = Flags { out: Some(out.clone()), jobs: Some(1), ..Default::default() };
    let cfg = parse_config(command, Some(&path), &flags).map_err(|e| e.to_string())?;
    run(&cfg).map_err(|e| e.to_string())?;
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(&out).map_err(|e| e.to_string())? {
        let entry = entry.map_err(|e| e.to_string())?;
        files.insert(entry.file_name().to_string_lossy().into_owned(), fs::read(entry.path()).map_err(|e| e.to_string())?);
    }
    Ok(files)
}

fn determinism() -> Outcome {
    let runs = [
        (CommandName::ConstructPoly, r#"{"polys":[[0,1],[0,0,1]],"K":6,"m_max":4,"eps":1e-9}"#.to_string()),
        (
            CommandName::ConstructGeneral,
            format!(r#"{{"family":{{"polys":[[0,1],[0,0,1]]}},"profiles":["01","10"],"K":4,"seed":{SEARCH_SEED}}}"#),
        ),
        (
            CommandName::Interpolate,
            format!(r#"{{"lambda":["1/2"],"rank":2,"L":6,"trials":100,"seed":{GRID_SEED}}}"#),
        ),
        (
            CommandName::Interpolate,
            format!(r#"{{"lambda":["1/4","1/2"],"rank":2,"L":6,"trials":100,"seed":{GRID_SEED}}}"#),
        ),
    ];
    let root = tempfile::tempdir().unwrap();
    let mut files = 0;
    for (i, (command, config)) in runs.iter().enumerate() {
        let a = run_cli(*command, config, &root.path().join(format!("{i}a")));
        let b = run_cli(*command, config, &root.path().join(format!("{i}b")));
        match (a, b) {
            (Ok(a), Ok(b)) => {
                if a != b {
                    return outcome(false, format!("{command} artifacts differ between runs"));
                }
                files += a.len();
            }
            (Err(e), _) | (_, Err(e)) => return outcome(false, format!("{command}: {e}")),
        }
    }
    outcome(true, format!("{files} artifacts byte-identical across reruns"))
}

fn main() {
    let start = Instant::now();
    let mut results: Vec<(usize, bool)> = Vec::new();
    let mut report = |n: usize, o: Outcome, d: Duration, limit: Option<Duration>| {
        let slow = limit.is_some_and(|l| d > l);
        let pass = o.pass && !slow;
        let budget = limit.map(|l| format!(" / limit {l:.0?}")).unwrap_or_default();
        let note = if slow { " (over time limit)" } else { "" };
        println!("criterion {n}: {} {}{note} [{d:.2?}{budget}]", if pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, pass));
    };
    let secs = |s: u64| Some(Duration::from_secs(s));
    let timed = |f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        (o, t.elapsed())
    };

    let (o, d) = timed(&character_averages);
    report(1, o, d, secs(1));
    let (o, d) = timed(&telescoping);
    report(2, o, d, secs(5));
    let t = Instant::now();
    let poly = poly_run(6);
    let build = t.elapsed();
    let (o, d) = timed(&|| poly_decay(&poly));
    report(3, o, d + build, secs(120));
    let (o, d) = timed(&oracle_equivalence);
    report(4, o, d, secs(30));
    let (o, d) = timed(&certificates);
    report(5, o, d, secs(120));
    let (o, d) = timed(&weyl_sums);
    report(6, o, d, secs(60));
    let (o, d) = timed(&convex_identity);
    report(7, o, d, secs(60));
    let (o, d) = timed(&|| spectral_sanity(&poly));
    report(8, o, d, secs(60));
    let (o, d) = timed(&determinism);
    report(9, o, d, None);

    let failed: Vec<usize> = results.iter().filter(|(_, pass)| !pass).map(|(n, _)| *n).collect();
    println!("acceptance: {} of {} passed in {:.2?}", results.len() - failed.len(), results.len(), start.elapsed());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
