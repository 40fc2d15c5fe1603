//! Run configurations, their JSON form, and the driver behind the `specmix`
//! binary. Every command writes its artifacts into one output directory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::arith::{format_rational, parse_rational, to_f64, IntRepr, Rational};
use crate::coin::CoinMeasure;
use crate::generic::{build_coin_measure_general, estimate_chain, search_alpha_anchor, tail_envelope};
use crate::grid::{cyclic_permutation, glue, verify_convex_identity, verify_metric_bound, DyadicInterval, GridAutomorphism};
use crate::poly::{
    all_profiles, build_coin_measure_poly, choose_anchor_poly, correlation_bound, digit_counts, make_profile,
    parse_profile, profile_label, solve_rational, AnchorSequence, Certificate, FactorialBase,
};
use crate::prime::{
    build_coin_measure_prime, check_coprime, check_telescoping, prime_anchor, prime_exponents, profile_table,
};
use crate::report::{emit_plotdata, fmt_f64, CorrelationTable};
use crate::sequences::{IntPolynomial, Member, SequenceFamily};
use crate::weyl::{equidistribution_report, random_alpha};
use crate::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-9;

/// Members allowed in a general search unless the config raises the cap.
pub const GENERAL_MEMBER_CAP: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandName {
    ConstructPoly,
    ConstructGeneral,
    ConstructPrimes,
    Verify,
    Weyl,
    Interpolate,
    Wiener,
}

impl CommandName {
    pub const ALL: [CommandName; 7] = [
        CommandName::ConstructPoly,
        CommandName::ConstructGeneral,
        CommandName::ConstructPrimes,
        CommandName::Verify,
        CommandName::Weyl,
        CommandName::Interpolate,
        CommandName::Wiener,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CommandName::ConstructPoly => "construct-poly",
            CommandName::ConstructGeneral => "construct-general",
            CommandName::ConstructPrimes => "construct-primes",
            CommandName::Verify => "verify",
            CommandName::Weyl => "weyl",
            CommandName::Interpolate => "interpolate",
            CommandName::Wiener => "wiener",
        }
    }
}

impl fmt::Display for CommandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CommandName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CommandName::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown command {s:?}")))
    }
}

/// Profiles as one 0/1 vector or a list of them.
#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum XiSpec {
    One(Vec<u8>),
    Many(Vec<Vec<u8>>),
}

impl XiSpec {
    fn profiles(&self) -> Result<Vec<Vec<bool>>> {
        let conv = |v: &Vec<u8>| -> Result<Vec<bool>> {
            v.iter()
                .map(|&x| match x {
                    0 => Ok(false),
                    1 => Ok(true),
                    _ => Err(Error::Validation(format!("xi entries must be 0 or 1, got {x}"))),
                })
                .collect()
        };
        match self {
            XiSpec::One(v) => Ok(vec![conv(v)?]),
            XiSpec::Many(vs) => vs.iter().map(conv).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PolyConfig {
    /// Coefficient lists `[a_0, a_1, ...]`.
    pub polys: Vec<Vec<IntRepr>>,
    /// Defaults to every profile in `{0,1}^N`.
    #[serde(default)]
    pub xi: Option<XiSpec>,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(default = "default_n0")]
    pub n0: IntRepr,
    /// Materialized levels; defaults to `K + 1`.
    #[serde(default, rename = "T")]
    pub t: Option<usize>,
    #[serde(default = "default_m_max")]
    pub m_max: i64,
    #[serde(default = "default_scan_limit")]
    pub scan_limit: u64,
    #[serde(default)]
    pub eps: Option<f64>,
}

fn default_n0() -> IntRepr {
    IntRepr::Num(2)
}

fn default_m_max() -> i64 {
    4
}

fn default_scan_limit() -> u64 {
    10_000
}

impl Default for PolyConfig {
    fn default() -> Self {
        PolyConfig {
            polys: vec![
                vec![IntRepr::Num(0), IntRepr::Num(1)],
                vec![IntRepr::Num(0), IntRepr::Num(0), IntRepr::Num(1)],
            ],
            xi: None,
            k: 4,
            n0: default_n0(),
            t: None,
            m_max: default_m_max(),
            scan_limit: default_scan_limit(),
            eps: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    #[serde(default)]
    pub polys: Option<Vec<Vec<IntRepr>>>,
    /// Values `phi(1), phi(2), ...` per member.
    #[serde(default)]
    pub tables: Option<Vec<Vec<IntRepr>>>,
}

impl FamilyConfig {
    pub fn build(&self) -> Result<SequenceFamily> {
        let ints = |v: &Vec<IntRepr>| v.iter().map(IntRepr::to_bigint).collect::<Result<Vec<_>>>();
        match (&self.polys, &self.tables) {
            (Some(p), None) => SequenceFamily::polynomials(
                p.iter().map(|c| ints(c).map(IntPolynomial::new)).collect::<Result<Vec<_>>>()?,
            ),
            (None, Some(t)) => SequenceFamily::new(t.iter().map(|c| ints(c).map(Member::Table)).collect::<Result<Vec<_>>>()?),
            _ => Err(Error::Validation("family needs exactly one of \"polys\" or \"tables\"".into())),
        }
    }

    fn default_pair() -> Self {
        FamilyConfig {
            polys: Some(vec![
                vec![IntRepr::Num(0), IntRepr::Num(1)],
                vec![IntRepr::Num(0), IntRepr::Num(0), IntRepr::Num(1)],
            ]),
            tables: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GeneralConfig {
    pub family: FamilyConfig,
    /// Labels such as `"01"`; defaults to every profile.
    #[serde(default)]
    pub profiles: Option<Vec<String>>,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(default = "default_scan_bound")]
    pub scan_bound: u64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_general_m_max")]
    pub m_max: i64,
    #[serde(default = "default_member_cap")]
    pub max_members: usize,
    #[serde(default)]
    pub eps: Option<f64>,
}

fn default_scan_bound() -> u64 {
    100_000
}

fn default_general_m_max() -> i64 {
    2
}

fn default_member_cap() -> usize {
    GENERAL_MEMBER_CAP
}

impl Default for GeneralConfig {
    fn default() -> Self {
        GeneralConfig {
            family: FamilyConfig::default_pair(),
            profiles: Some(vec!["01".into(), "10".into()]),
            k: 4,
            scan_bound: default_scan_bound(),
            seed: None,
            m_max: default_general_m_max(),
            max_members: default_member_cap(),
            eps: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PrimesConfig {
    #[serde(rename = "N")]
    pub n: usize,
    pub primes: Vec<IntRepr>,
    #[serde(rename = "K")]
    pub k: usize,
    /// Materialized levels; defaults to `K + 3`.
    #[serde(default, rename = "T")]
    pub t: Option<usize>,
    #[serde(default = "default_general_m_max")]
    pub m_max: i64,
    #[serde(default)]
    pub eps: Option<f64>,
}

impl Default for PrimesConfig {
    fn default() -> Self {
        PrimesConfig {
            n: 2,
            primes: vec![IntRepr::Num(2), IntRepr::Num(3)],
            k: 4,
            t: None,
            m_max: default_general_m_max(),
            eps: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Path to a `measure.json` bundle, relative to the config file.
    pub bundle: PathBuf,
    #[serde(default)]
    pub eps: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct WienerConfig {
    pub bundle: PathBuf,
    #[serde(default = "default_wiener_ms", rename = "M")]
    pub m: Vec<u64>,
    #[serde(default)]
    pub eps: Option<f64>,
}

fn default_wiener_ms() -> Vec<u64> {
    vec![16, 64, 256]
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct WeylConfig {
    pub family: FamilyConfig,
    /// Explicit `"p/q"` values; when absent, `random` draws are used.
    #[serde(default)]
    pub alphas: Option<Vec<String>>,
    #[serde(default = "default_random")]
    pub random: usize,
    #[serde(rename = "M", default = "default_weyl_m")]
    pub m: u64,
    #[serde(rename = "box", default = "default_box")]
    pub coeff_box: i64,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_random() -> usize {
    20
}

fn default_weyl_m() -> u64 {
    10_000
}

fn default_box() -> i64 {
    3
}

impl Default for WeylConfig {
    fn default() -> Self {
        WeylConfig {
            family: FamilyConfig::default_pair(),
            alphas: None,
            random: default_random(),
            m: default_weyl_m(),
            coeff_box: default_box(),
            seed: None,
        }
    }
}

/// One gluing piece: an explicit cell map or `"identity"`, `"random"`,
/// `"rotation:<rank>"`.
#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum PieceSpec {
    Perm(Vec<u32>),
    Named(String),
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct InterpolateConfig {
    pub lambda: Vec<String>,
    pub rank: u32,
    #[serde(rename = "L")]
    pub l: u32,
    /// Defaults to random pieces.
    #[serde(default)]
    pub pieces: Option<Vec<PieceSpec>>,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<IntRepr>,
    /// Defaults to `rank`.
    #[serde(default)]
    pub test_rank: Option<u32>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_n_list() -> Vec<IntRepr> {
    (1..=16).map(IntRepr::Num).collect()
}

fn default_trials() -> usize {
    1
}

impl Default for InterpolateConfig {
    fn default() -> Self {
        InterpolateConfig {
            lambda: vec!["1/4".into(), "1/2".into()],
            rank: 2,
            l: 6,
            pieces: None,
            n_list: default_n_list(),
            test_rank: None,
            trials: default_trials(),
            seed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CommandConfig {
    Poly(PolyConfig),
    General(GeneralConfig),
    Primes(PrimesConfig),
    Verify(VerifyConfig),
    Weyl(WeylConfig),
    Interpolate(InterpolateConfig),
    Wiener(WienerConfig),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: CommandConfig,
    pub out: PathBuf,
    pub eps: f64,
    pub jobs: usize,
    pub seed: u64,
}

/// Command-line overrides; `None` falls back to the config file, then to
/// the defaults.
#[derive(Clone, Debug, Default)]
pub struct Flags {
    pub out: Option<PathBuf>,
    pub eps: Option<f64>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
}

fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("{origin}: {e}")))
}

fn resolve(base: Option<&Path>, p: &Path) -> PathBuf {
    match base.and_then(Path::parent) {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

/// Reads and validates a config; without a path the command's defaults are
/// used (commands that read a bundle need one).
pub fn parse_config(command: CommandName, path: Option<&Path>, flags: &Flags) -> Result<RunConfig> {
    let text = match path {
        Some(p) => Some(fs::read_to_string(p).map_err(|e| Error::Parse(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let origin = path.map(|p| p.display().to_string()).unwrap_or_default();
    let (cmd, cfg_eps, cfg_seed) = match (command, &text) {
        (CommandName::ConstructPoly, Some(t)) => {
            let c: PolyConfig = parse_json(t, &origin)?;
            let e = c.eps;
            (CommandConfig::Poly(c), e, None)
        }
        (CommandName::ConstructPoly, None) => (CommandConfig::Poly(PolyConfig::default()), None, None),
        (CommandName::ConstructGeneral, Some(t)) => {
            let c: GeneralConfig = parse_json(t, &origin)?;
            let (e, s) = (c.eps, c.seed);
            (CommandConfig::General(c), e, s)
        }
        (CommandName::ConstructGeneral, None) => (CommandConfig::General(GeneralConfig::default()), None, None),
        (CommandName::ConstructPrimes, Some(t)) => {
            let c: PrimesConfig = parse_json(t, &origin)?;
            let e = c.eps;
            (CommandConfig::Primes(c), e, None)
        }
        (CommandName::ConstructPrimes, None) => (CommandConfig::Primes(PrimesConfig::default()), None, None),
        (CommandName::Verify, Some(t)) => {
            let mut c: VerifyConfig = parse_json(t, &origin)?;
            c.bundle = resolve(path, &c.bundle);
            let e = c.eps;
            (CommandConfig::Verify(c), e, None)
        }
        (CommandName::Wiener, Some(t)) => {
            let mut c: WienerConfig = parse_json(t, &origin)?;
            c.bundle = resolve(path, &c.bundle);
            let e = c.eps;
            (CommandConfig::Wiener(c), e, None)
        }
        (CommandName::Verify | CommandName::Wiener, None) => {
            return Err(Error::Validation(format!("{command} needs --config naming a bundle")));
        }
        (CommandName::Weyl, Some(t)) => {
            let c: WeylConfig = parse_json(t, &origin)?;
            let s = c.seed;
            (CommandConfig::Weyl(c), None, s)
        }
        (CommandName::Weyl, None) => (CommandConfig::Weyl(WeylConfig::default()), None, None),
        (CommandName::Interpolate, Some(t)) => {
            let c: InterpolateConfig = parse_json(t, &origin)?;
            let s = c.seed;
            (CommandConfig::Interpolate(c), None, s)
        }
        (CommandName::Interpolate, None) => (CommandConfig::Interpolate(InterpolateConfig::default()), None, None),
    };
    let eps = flags.eps.or(cfg_eps).unwrap_or(DEFAULT_EPS);
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Validation(format!("eps must be positive, got {eps}")));
    }
    let jobs = flags.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        return Err(Error::Validation("jobs must be at least 1".into()));
    }
    let config = RunConfig {
        command: cmd,
        out: flags.out.clone().unwrap_or_else(|| PathBuf::from("out")),
        eps,
        jobs,
        seed: flags.seed.or(cfg_seed).unwrap_or(0),
    };
    validate(&config)?;
    Ok(config)
}

fn validate(config: &RunConfig) -> Result<()> {
    let bad = |m: String| Err(Error::Validation(m));
    match &config.command {
        CommandConfig::Poly(c) => {
            if c.polys.is_empty() {
                return bad("polys is empty".into());
            }
            if c.k == 0 {
                return bad("K must be positive".into());
            }
            if let Some(xi) = &c.xi {
                for p in xi.profiles()? {
                    if p.len() != c.polys.len() {
                        return bad(format!("xi has length {}, there are {} polys", p.len(), c.polys.len()));
                    }
                }
            }
            if c.t.is_some_and(|t| t < c.k) {
                return bad("T must be at least K".into());
            }
            if c.m_max < 0 {
                return bad("m_max must be nonnegative".into());
            }
        }
        CommandConfig::General(c) => {
            if c.k == 0 {
                return bad("K must be positive".into());
            }
            let n = c.family.build()?.len();
            if n > c.max_members {
                return bad(format!("{n} members exceed the cap of {} (raise max_members)", c.max_members));
            }
            for p in c.profiles.iter().flatten() {
                if parse_profile(p)?.len() != n {
                    return bad(format!("profile {p:?} does not have {n} entries"));
                }
            }
            if c.m_max < 0 {
                return bad("m_max must be nonnegative".into());
            }
        }
        CommandConfig::Primes(c) => {
            if c.k == 0 {
                return bad("K must be positive".into());
            }
            if c.t.is_some_and(|t| t < c.k) {
                return bad("T must be at least K".into());
            }
            if c.m_max < 0 {
                return bad("m_max must be nonnegative".into());
            }
        }
        CommandConfig::Weyl(c) => {
            if c.m == 0 || c.coeff_box < 1 {
                return bad("M and box must be positive".into());
            }
            if c.alphas.is_none() && c.random == 0 {
                return bad("no alphas given and random = 0".into());
            }
        }
        CommandConfig::Interpolate(c) => {
            if c.trials == 0 {
                return bad("trials must be positive".into());
            }
            if c.test_rank.is_some_and(|t| t > c.rank) {
                return bad("test_rank must not exceed rank".into());
            }
        }
        CommandConfig::Wiener(c) => {
            if c.m.is_empty() {
                return bad("M list is empty".into());
            }
        }
        CommandConfig::Verify(_) => {}
    }
    Ok(())
}

/// One measure inside a bundle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileMeasure {
    pub xi: String,
    pub measure: CoinMeasure,
}

/// The `measure.json` artifact: everything needed to re-verify a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bundle {
    pub kind: String,
    pub family: SequenceFamily,
    pub anchor: AnchorSequence,
    pub k_max: usize,
    pub m_max: i64,
    pub eps: f64,
    pub measures: Vec<ProfileMeasure>,
}

/// What a run produced.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunSummary {
    pub command: String,
    pub files: Vec<PathBuf>,
    pub violations: Vec<String>,
}

struct Writer {
    dir: PathBuf,
    summary: RunSummary,
}

impl Writer {
    fn new(dir: &Path, command: CommandName) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Writer { dir: dir.to_path_buf(), summary: RunSummary { command: command.to_string(), ..Default::default() } })
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let p = self.dir.join(name);
        fs::write(&p, body)?;
        self.summary.files.push(p);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.text(name, &body)
    }

    fn violation(&mut self, msg: String) {
        self.summary.violations.push(msg);
    }

    fn finish(self) -> Result<RunSummary> {
        if let Some(first) = self.summary.violations.first() {
            let more = self.summary.violations.len() - 1;
            let msg = if more > 0 { format!("{first} (and {more} more)") } else { first.clone() };
            return Err(Error::Violation(msg));
        }
        Ok(self.summary)
    }
}

/// Runs a validated config on a pool of `config.jobs` workers.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::Validation(format!("worker pool: {e}")))?;
    pool.install(|| match &config.command {
        CommandConfig::Poly(c) => run_poly(config, c),
        CommandConfig::General(c) => run_general(config, c),
        CommandConfig::Primes(c) => run_primes(config, c),
        CommandConfig::Verify(c) => run_verify(config, c),
        CommandConfig::Weyl(c) => run_weyl(config, c),
        CommandConfig::Interpolate(c) => run_interpolate(config, c),
        CommandConfig::Wiener(c) => run_wiener(config, c),
    })
}

/// Correlation tables for every measure of a bundle, with the checks that
/// apply to its kind.
fn check_bundle(bundle: &Bundle, eps: f64, w: &mut Writer) -> Result<Vec<(String, CorrelationTable)>> {
    if let Err(e) = bundle.anchor.verify(&bundle.family) {
        match e {
            Error::Violation(m) => w.violation(format!("certificate: {m}")),
            other => return Err(other),
        }
    }
    let k_max = bundle.k_max.min(bundle.anchor.len());
    let mut tables = Vec::new();
    for pm in &bundle.measures {
        let xi = parse_profile(&pm.xi)?;
        let table = pm.measure.verify_profile(&bundle.family, &bundle.anchor.entries, &xi, k_max, -bundle.m_max..=bundle.m_max, eps)?;
        for row in &table.rows {
            let in_range = row.sigma_shifted >= -row.radius && row.sigma_shifted <= 1.0 + row.radius;
            if !in_range || !row.error.is_finite() || !row.radius.is_finite() {
                w.violation(format!("profile {}: sigma_hat invalid or outside [0, 1] at j {}, k {}, m {}", pm.xi, row.j, row.k, row.m));
            }
        }
        if bundle.kind == "poly" {
            for row in &table.rows {
                let bound = to_f64(&correlation_bound(&bundle.family, row.j, &bundle.anchor.entries, row.k)?);
                if !(row.error <= bound * (1.0 + 4.0 * f64::EPSILON) + 2.0 * eps) {
                    w.violation(format!(
                        "profile {}: e at j {}, k {}, m {} is {} above bound {}",
                        pm.xi,
                        row.j,
                        row.k,
                        row.m,
                        fmt_f64(row.error),
                        fmt_f64(bound)
                    ));
                }
            }
        }
        if bundle.kind == "general" && pm.measure.len() <= 16 {
            let alphas: Vec<Rational> = pm.measure.levels().iter().map(|l| l.frequency().value().clone()).collect();
            let t = alphas.len().min(bundle.anchor.len());
            if let Err(e) = estimate_chain(&bundle.family, &xi, &alphas[..t], &bundle.anchor.entries) {
                match e {
                    Error::Violation(m) => w.violation(format!("profile {}: {m}", pm.xi)),
                    other => return Err(other),
                }
            }
        }
        tables.push((pm.xi.clone(), table));
    }
    Ok(tables)
}

/// CSV with a leading `xi` column so tables of several profiles can share a file.
fn profile_csv(tables: &[(String, CorrelationTable)]) -> String {
    let mut out = String::from("xi,j,k,m,sigma_shifted,sigma_target,error,radius\n");
    for (xi, t) in tables {
        for line in t.to_csv().lines().skip(1) {
            out.push_str(xi);
            out.push(',');
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

/// Writes `correlations_<xi>.csv` per profile, the combined
/// `correlations.csv` and `plot.dat`.
fn write_tables(w: &mut Writer, tables: Vec<(String, CorrelationTable)>) -> Result<usize> {
    for (xi, t) in &tables {
        w.text(&format!("correlations_{xi}.csv"), &t.to_csv())?;
    }
    w.text("correlations.csv", &profile_csv(&tables))?;
    let mut merged = CorrelationTable::default();
    for (_, t) in tables {
        merged.extend(t);
    }
    if !merged.is_empty() {
        let p = w.dir.join("plot.dat");
        emit_plotdata(&merged, &p)?;
        w.summary.files.push(p);
    }
    Ok(merged.len())
}

fn write_bundle_outputs(bundle: &Bundle, eps: f64, w: &mut Writer, extra: serde_json::Value) -> Result<()> {
    let tables = check_bundle(bundle, eps, w)?;
    w.json("measure.json", bundle)?;
    w.json(
        "certificate.json",
        &json!({
            "anchor": bundle.anchor,
            "digits": digit_counts(&bundle.anchor.entries),
            "checks": extra,
            "violations": w.summary.violations,
        }),
    )?;
    write_tables(w, tables)?;
    Ok(())
}

fn run_poly(config: &RunConfig, c: &PolyConfig) -> Result<RunSummary> {
    let mut w = Writer::new(&config.out, CommandName::ConstructPoly)?;
    let family = SequenceFamily::polynomials(
        c.polys
            .iter()
            .map(|p| p.iter().map(IntRepr::to_bigint).collect::<Result<Vec<_>>>().map(IntPolynomial::new))
            .collect::<Result<Vec<_>>>()?,
    )?;
    let profiles = match &c.xi {
        Some(x) => x.profiles()?,
        None => all_profiles(family.len()),
    };
    let d = family.coefficient_matrix()?;
    let solutions = profiles
        .iter()
        .map(|xi| Ok((xi.clone(), solve_rational(&d, &make_profile(xi)?.b)?)))
        .collect::<Result<Vec<_>>>()?;
    let t_count = c.t.unwrap_or(c.k + 1);
    let n0 = c.n0.to_bigint()?;
    let anchor = choose_anchor_poly(&family, &solutions, FactorialBase::new(), t_count, &n0, c.scan_limit)?;
    let measures = solutions
        .iter()
        .map(|(xi, x)| {
            Ok(ProfileMeasure { xi: profile_label(xi), measure: build_coin_measure_poly(x, &anchor.entries, t_count)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let bundle = Bundle { kind: "poly".into(), family, anchor, k_max: c.k, m_max: c.m_max, eps: config.eps, measures };
    write_bundle_outputs(&bundle, config.eps, &mut w, json!({ "T": t_count }))?;
    w.finish()
}

fn run_general(config: &RunConfig, c: &GeneralConfig) -> Result<RunSummary> {
    let mut w = Writer::new(&config.out, CommandName::ConstructGeneral)?;
    let family = c.family.build()?;
    let profiles = match &c.profiles {
        Some(p) => p.iter().map(|s| parse_profile(s)).collect::<Result<Vec<_>>>()?,
        None => all_profiles(family.len()),
    };
    // one stage past K so the tail beyond the last checked index is negligible
    let g = search_alpha_anchor(&family, &profiles, c.k + 1, c.scan_bound, config.seed)?;
    let envelope = tail_envelope(&family, g.anchor.entries.last().expect("K >= 1"))?;
    let measures = g
        .alphas
        .iter()
        .map(|pa| Ok(ProfileMeasure { xi: pa.xi.clone(), measure: build_coin_measure_general(&pa.alpha, Some(&envelope))? }))
        .collect::<Result<Vec<_>>>()?;
    let alphas: Vec<serde_json::Value> = g
        .alphas
        .iter()
        .map(|pa| json!({ "xi": pa.xi, "alpha": pa.alpha.iter().map(format_rational).collect::<Vec<_>>() }))
        .collect();
    let bundle = Bundle { kind: "general".into(), family, anchor: g.anchor, k_max: c.k, m_max: c.m_max, eps: config.eps, measures };
    write_bundle_outputs(&bundle, config.eps, &mut w, json!({ "alphas": alphas, "envelope": envelope.to_string() }))?;
    w.finish()
}

fn run_primes(config: &RunConfig, c: &PrimesConfig) -> Result<RunSummary> {
    let mut w = Writer::new(&config.out, CommandName::ConstructPrimes)?;
    let primes = c.primes.iter().map(IntRepr::to_bigint).collect::<Result<Vec<_>>>()?;
    let spec = prime_exponents(c.n, &primes)?;
    let t_count = c.t.unwrap_or(c.k + 3);
    let anchor = prime_anchor(&spec, t_count)?;
    if let Err(e) = check_coprime(&spec) {
        w.violation(e.to_string());
    }
    let table = profile_table(&spec)?;
    for row in &table {
        let want: Vec<u8> = row.xi.chars().map(|ch| u8::from(ch == '0')).collect();
        if row.indicator != want {
            w.violation(format!("character averages at index {} do not match the profile", row.n_index));
        }
    }
    let mut measures = Vec::new();
    let mut telescoping = 0usize;
    for i in 0..spec.profile_count() {
        let m = build_coin_measure_prime(&spec, i, &anchor.entries, t_count)?;
        match check_telescoping(&spec, i, &m, &anchor.entries, c.k) {
            Ok(n) => telescoping += n,
            Err(Error::Violation(msg)) => w.violation(msg),
            Err(e) => return Err(e),
        }
        measures.push(ProfileMeasure { xi: profile_label(&spec.xi(i)), measure: m });
    }
    w.json("profiles.json", &json!({ "spec": spec, "table": table }))?;
    let bundle =
        Bundle { kind: "primes".into(), family: spec.family(), anchor, k_max: c.k, m_max: c.m_max, eps: config.eps, measures };
    write_bundle_outputs(&bundle, config.eps, &mut w, json!({ "T": t_count, "telescoping_checks": telescoping }))?;
    w.finish()
}

fn load_bundle(path: &Path) -> Result<Bundle> {
    let text = fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_json(&text, &path.display().to_string())
}

fn run_verify(config: &RunConfig, c: &VerifyConfig) -> Result<RunSummary> {
    let bundle = load_bundle(&c.bundle)?;
    let mut w = Writer::new(&config.out, CommandName::Verify)?;
    let tables = check_bundle(&bundle, config.eps, &mut w)?;
    let max_error = tables.iter().flat_map(|(_, t)| t.rows.iter().map(|r| r.error)).fold(0.0, f64::max);
    let rows = write_tables(&mut w, tables)?;
    let summary = json!({
        "bundle": c.bundle,
        "kind": bundle.kind,
        "profiles": bundle.measures.iter().map(|m| m.xi.clone()).collect::<Vec<_>>(),
        "rows": rows,
        "max_error": fmt_f64(max_error),
        "violations": w.summary.violations,
    });
    w.json("verify.json", &summary)?;
    w.finish()
}

fn run_wiener(config: &RunConfig, c: &WienerConfig) -> Result<RunSummary> {
    let bundle = load_bundle(&c.bundle)?;
    let mut w = Writer::new(&config.out, CommandName::Wiener)?;
    let mut rows = Vec::new();
    for pm in &bundle.measures {
        let averages = c.m.iter().map(|&m| pm.measure.wiener_average(m, config.eps)).collect::<Result<Vec<_>>>()?;
        let decreasing = averages.windows(2).all(|v| v[1] < v[0]);
        rows.push(json!({
            "xi": pm.xi,
            "averages": averages.iter().map(|&a| fmt_f64(a)).collect::<Vec<_>>(),
            "strictly_decreasing": decreasing,
        }));
    }
    w.json("wiener.json", &json!({ "M": c.m, "measures": rows }))?;
    w.finish()
}

fn run_weyl(config: &RunConfig, c: &WeylConfig) -> Result<RunSummary> {
    let mut w = Writer::new(&config.out, CommandName::Weyl)?;
    let family = c.family.build()?;
    let alphas: Vec<Rational> = match &c.alphas {
        Some(list) => list.iter().map(|s| parse_rational(s)).collect::<Result<_>>()?,
        None => {
            let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
            (0..c.random).map(|_| random_alpha(&mut rng)).collect()
        }
    };
    let mut csv = String::from("index,alpha,max_abs,discrepancy\n");
    let mut reports = Vec::new();
    for (i, alpha) in alphas.iter().enumerate() {
        let r = equidistribution_report(&family, std::slice::from_ref(alpha), c.m, c.coeff_box)?;
        csv.push_str(&format!("{},{},{},{}\n", i + 1, format_rational(alpha), fmt_f64(r.max_abs), fmt_f64(r.discrepancy)));
        reports.push(json!({ "alpha": format_rational(alpha), "report": r }));
    }
    w.text("weyl.csv", &csv)?;
    w.json("weyl.json", &json!({ "M": c.m, "box": c.coeff_box, "reports": reports }))?;
    w.finish()
}

fn build_piece(spec: &PieceSpec, l: u32, rng: &mut ChaCha20Rng) -> Result<GridAutomorphism> {
    match spec {
        PieceSpec::Perm(p) => GridAutomorphism::new(l, p.clone()),
        PieceSpec::Named(name) => match name.as_str() {
            "identity" => GridAutomorphism::identity(l),
            "random" => GridAutomorphism::random(l, rng),
            other => match other.strip_prefix("rotation:").map(str::parse::<u32>) {
                Some(Ok(rank)) => cyclic_permutation(rank, l),
                _ => Err(Error::Parse(format!("unknown piece {other:?}"))),
            },
        },
    }
}

fn run_interpolate(config: &RunConfig, c: &InterpolateConfig) -> Result<RunSummary> {
    let mut w = Writer::new(&config.out, CommandName::Interpolate)?;
    let lambda = c.lambda.iter().map(|s| parse_rational(s)).collect::<Result<Vec<_>>>()?;
    let n_list = c.n_list.iter().map(IntRepr::to_bigint).collect::<Result<Vec<_>>>()?;
    let test_rank = c.test_rank.unwrap_or(c.rank);
    let reference = cyclic_permutation(c.rank, c.l)?;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let specs: Vec<PieceSpec> =
        c.pieces.clone().unwrap_or_else(|| vec![PieceSpec::Named("random".into()); lambda.len() + 1]);
    let mut worst = Rational::zero();
    let mut trials = Vec::new();
    let mut first: Option<(GridAutomorphism, Vec<GridAutomorphism>)> = None;
    for trial in 1..=c.trials {
        let pieces = specs.iter().map(|s| build_piece(s, c.l, &mut rng)).collect::<Result<Vec<_>>>()?;
        let glued = glue(&lambda, &pieces, c.rank)?;
        let residual = verify_convex_identity(&glued, &pieces, &lambda, c.rank, test_rank, &n_list)?;
        let bound = verify_metric_bound(&reference, &glued, &pieces, &lambda, c.rank)?;
        if !residual.is_zero() {
            w.violation(format!("trial {trial}: convex identity residual {}", format_rational(&residual)));
        }
        if !bound.holds {
            w.violation(format!("trial {trial}: metric bound fails"));
        }
        if residual > worst {
            worst = residual.clone();
        }
        trials.push(json!({ "trial": trial, "residual": format_rational(&residual), "metric_bound": bound }));
        if first.is_none() {
            first = Some((glued, pieces));
        }
    }
    let (glued, pieces) = first.expect("trials >= 1");
    let csv = interpolation_csv(&glued, &pieces, &lambda, test_rank, &n_list)?;
    w.text("correlations.csv", &csv)?;
    w.json(
        "interpolation.json",
        &json!({
            "lambda": c.lambda,
            "rank": c.rank,
            "L": c.l,
            "G": glued.resolution(),
            "test_rank": test_rank,
            "n_list": n_list.iter().map(|n| n.to_string()).collect::<Vec<_>>(),
            "max_residual": format_rational(&worst),
            "trials": trials,
            "glued": glued,
        }),
    )?;
    w.finish()
}

/// `mu(E cap T^-n F)` for the glued map next to `sum_t delta_t` of the pieces,
/// on rank-`test_rank` intervals, as exact rationals.
fn interpolation_csv(
    glued: &GridAutomorphism,
    pieces: &[GridAutomorphism],
    lambda: &[Rational],
    test_rank: u32,
    n_list: &[BigInt],
) -> Result<String> {
    let w = crate::grid::dyadic_weights(lambda)?;
    let scale = Rational::new(BigInt::from(1), BigInt::from(1u64 << w.bits));
    let mut out = String::from("e_rank,e_index,f_rank,f_index,n,glued,convex,residual\n");
    for n in n_list {
        let gp = glued.power(n);
        let pps: Vec<GridAutomorphism> = pieces.iter().map(|p| p.power(n)).collect();
        for e in 0..1u64 << test_rank {
            for f in 0..1u64 << test_rank {
                let ei = DyadicInterval::new(test_rank, e)?;
                let fi = DyadicInterval::new(test_rank, f)?;
                let zero = BigInt::zero();
                let g = crate::grid::correlation(&gp, ei, fi, &zero)?;
                let mut mix = Rational::zero();
                for (p, &d) in pps.iter().zip(&w.delta) {
                    if d > 0 {
                        mix += crate::grid::correlation(p, ei, fi, &zero)? * Rational::from_integer(BigInt::from(d)) * &scale;
                    }
                }
                let res = num_traits::Signed::abs(&(&g - &mix));
                out.push_str(&format!(
                    "{test_rank},{e},{test_rank},{f},{n},{},{},{}\n",
                    format_rational(&g),
                    format_rational(&mix),
                    format_rational(&res)
                ));
            }
        }
    }
    Ok(out)
}

/// The JSON record printed for a failed run.
pub fn error_record(e: &Error) -> String {
    json!({ "error": e.code(), "message": e.to_string() }).to_string()
}

/// Anchor certificate kind as a short name.
pub fn certificate_kind(anchor: &AnchorSequence) -> &'static str {
    match anchor.certificate {
        Certificate::Poly(_) => "poly",
        Certificate::Generic(_) => "generic",
        Certificate::Prime(_) => "prime",
    }
}
