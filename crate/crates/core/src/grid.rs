//! Measure preserving maps of `[0, 1)` that permute the `2^G` cells
//! `[i/2^G, (i+1)/2^G)` by translation, the truncated weak metric, and the
//! slab gluing of several such maps.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{format_rational, Rational};
use crate::{Error, Result};

/// Largest supported resolution `G` (grids of `2^26` cells).
pub const MAX_RESOLUTION: u32 = 26;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct GridAutomorphism {
    g: u32,
    perm: Vec<u32>,
}

#[derive(Deserialize)]
struct RawGrid {
    g: u32,
    perm: Vec<u32>,
}

impl TryFrom<RawGrid> for GridAutomorphism {
    type Error = Error;

    fn try_from(r: RawGrid) -> Result<Self> {
        GridAutomorphism::new(r.g, r.perm)
    }
}

/// `[r / 2^rank, (r + 1) / 2^rank)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub rank: u32,
    pub index: u64,
}

impl DyadicInterval {
    pub fn new(rank: u32, index: u64) -> Result<Self> {
        if rank >= 64 || index >= 1u64 << rank {
            return Err(Error::Validation(format!("no dyadic interval of rank {rank} with index {index}")));
        }
        Ok(DyadicInterval { rank, index })
    }

    /// Whether cell `x` of a `2^g` grid lies inside.
    fn contains(&self, x: u32, g: u32) -> bool {
        (x >> (g - self.rank)) as u64 == self.index
    }
}

fn check_resolution(g: u32) -> Result<()> {
    if g > MAX_RESOLUTION {
        return Err(Error::ResolutionOverflow(g));
    }
    Ok(())
}

impl GridAutomorphism {
    pub fn new(g: u32, perm: Vec<u32>) -> Result<Self> {
        check_resolution(g)?;
        let size = 1usize << g;
        if perm.len() != size {
            return Err(Error::Validation(format!("a grid of resolution {g} needs {size} entries, got {}", perm.len())));
        }
        let mut seen = vec![false; size];
        for &p in &perm {
            match seen.get_mut(p as usize) {
                Some(s) if !*s => *s = true,
                _ => return Err(Error::Validation(format!("cell map is not a bijection (at {p})"))),
            }
        }
        Ok(GridAutomorphism { g, perm })
    }

    pub fn identity(g: u32) -> Result<Self> {
        check_resolution(g)?;
        Ok(GridAutomorphism { g, perm: (0..1u32 << g).collect() })
    }

    pub fn random(g: u32, rng: &mut impl Rng) -> Result<Self> {
        let mut s = Self::identity(g)?;
        s.perm.shuffle(rng);
        Ok(s)
    }

    pub fn resolution(&self) -> u32 {
        self.g
    }

    pub fn perm(&self) -> &[u32] {
        &self.perm
    }

    pub fn size(&self) -> usize {
        self.perm.len()
    }

    fn same_resolution(&self, other: &Self) -> Result<()> {
        if self.g != other.g {
            return Err(Error::ResolutionMismatch(self.g, other.g));
        }
        Ok(())
    }

    /// `self o other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.same_resolution(other)?;
        let perm = other.perm.iter().map(|&i| self.perm[i as usize]).collect();
        Ok(GridAutomorphism { g: self.g, perm })
    }

    pub fn inverse(&self) -> Self {
        let mut perm = vec![0u32; self.size()];
        for (i, &p) in self.perm.iter().enumerate() {
            perm[p as usize] = i as u32;
        }
        GridAutomorphism { g: self.g, perm }
    }

    /// `T^n` by repeated squaring; negative `n` goes through the inverse.
    pub fn power(&self, n: &BigInt) -> Self {
        let mut base = if n.is_negative() { self.inverse() } else { self.clone() };
        let mut e = n.abs();
        let mut acc = GridAutomorphism { g: self.g, perm: (0..self.size() as u32).collect() };
        let two = BigInt::from(2);
        while !e.is_zero() {
            if e.is_odd() {
                acc = base.compose(&acc).expect("same resolution");
            }
            e /= &two;
            if !e.is_zero() {
                base = base.compose(&base).expect("same resolution");
            }
        }
        acc
    }

    /// The same map on a grid `2^extra` times finer.
    pub fn refine(&self, extra: u32) -> Result<Self> {
        let g = self.g + extra;
        check_resolution(g)?;
        let mut perm = Vec::with_capacity(1 << g);
        for x in 0..1u32 << g {
            let coarse = self.perm[(x >> extra) as usize];
            perm.push((coarse << extra) | (x & ((1 << extra) - 1)));
        }
        Ok(GridAutomorphism { g, perm })
    }

    /// Whether every rank-`rank` interval is carried onto a rank-`rank`
    /// interval by a single translation.
    pub fn moves_rigidly(&self, rank: u32) -> bool {
        if rank > self.g {
            return false;
        }
        let width = 1u32 << (self.g - rank);
        (0..1u32 << rank).all(|r| {
            let start = self.perm[(r * width) as usize];
            start % width == 0 && (1..width).all(|o| self.perm[(r * width + o) as usize] == start + o)
        })
    }

    /// Rigid at `rank`, and the induced permutation of rank-`rank`
    /// intervals is a single cycle.
    pub fn is_rank_cyclic(&self, rank: u32) -> bool {
        if !self.moves_rigidly(rank) {
            return false;
        }
        let width = 1u32 << (self.g - rank);
        let mut r = 0u32;
        for step in 1..=1u32 << rank {
            r = self.perm[(r * width) as usize] / width;
            if r == 0 {
                return step == 1 << rank;
            }
        }
        false
    }
}

/// `x -> x + 2^(-rank) mod 1` on a `2^g` grid.
pub fn cyclic_permutation(rank: u32, g: u32) -> Result<GridAutomorphism> {
    if rank > g || rank == 0 {
        return Err(Error::ResolutionTooCoarse { rank, g });
    }
    check_resolution(g)?;
    let shift = 1u32 << (g - rank);
    let mask = (1u32 << g) - 1;
    Ok(GridAutomorphism { g, perm: (0..1u32 << g).map(|i| (i + shift) & mask).collect() })
}

/// Cyclic permutation of rank-`rank` intervals visiting them in `order`.
pub fn cyclic_from_order(order: &[u32], rank: u32, g: u32) -> Result<GridAutomorphism> {
    if rank > g {
        return Err(Error::ResolutionTooCoarse { rank, g });
    }
    let count = 1usize << rank;
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if order.len() != count || sorted.iter().enumerate().any(|(i, &v)| v as usize != i) {
        return Err(Error::Validation(format!("order must list all {count} intervals once")));
    }
    let width = 1u32 << (g - rank);
    let mut perm = vec![0u32; 1 << g];
    for (i, &r) in order.iter().enumerate() {
        let next = order[(i + 1) % count];
        for o in 0..width {
            perm[(r * width + o) as usize] = next * width + o;
        }
    }
    GridAutomorphism::new(g, perm)
}

/// `sum_{l=1}^{L} 2^(-2l) sum_{E of rank l} mu(TE sym-diff SE)`, exact.
pub fn dyadic_metric(t: &GridAutomorphism, s: &GridAutomorphism, l_max: u32) -> Result<Rational> {
    t.same_resolution(s)?;
    if l_max > t.g {
        return Err(Error::RankTooFine { rank: l_max, g: t.g });
    }
    let g = t.g;
    let per_rank: Vec<Rational> = (1..=l_max)
        .into_par_iter()
        .map(|l| {
            let width = 1usize << (g - l);
            let mut mark = vec![u32::MAX; t.size()];
            let mut moved: u64 = 0;
            for r in 0..1usize << l {
                let cells = r * width..(r + 1) * width;
                for i in cells.clone() {
                    mark[t.perm[i] as usize] = r as u32;
                }
                let common = cells.filter(|&i| mark[s.perm[i] as usize] == r as u32).count();
                moved += 2 * (width - common) as u64;
            }
            Rational::new(BigInt::from(moved), BigInt::one() << (g + 2 * l))
        })
        .collect();
    Ok(per_rank.into_iter().fold(Rational::zero(), |a, b| a + b))
}

/// Bound on what the ranks above `l_max` can add to the metric: `2^(-L)`.
pub fn metric_tail(l_max: u32) -> Rational {
    Rational::new(BigInt::one(), BigInt::one() << l_max)
}

/// `S^(-1) T S`.
pub fn conjugate(t: &GridAutomorphism, s: &GridAutomorphism) -> Result<GridAutomorphism> {
    t.same_resolution(s)?;
    let sinv = s.inverse();
    let perm = s.perm.iter().map(|&x| sinv.perm[t.perm[x as usize] as usize]).collect();
    Ok(GridAutomorphism { g: t.g, perm })
}

/// Weights `delta_t = lambda_t - lambda_{t-1}` with `lambda_0 = 0`,
/// `lambda_{N+1} = 1`, as integers over `2^bits`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DyadicWeights {
    pub bits: u32,
    /// `delta_t 2^bits`.
    pub delta: Vec<u32>,
    /// `lambda_{t-1} 2^bits`, the slab offsets.
    pub start: Vec<u32>,
}

pub fn dyadic_weights(lambda: &[Rational]) -> Result<DyadicWeights> {
    let mut bits = 0u32;
    for l in lambda {
        let d = l.denom();
        let k = d.trailing_zeros().unwrap_or(0);
        if (BigInt::one() << k) != *d {
            return Err(Error::NonDyadicLambda(format_rational(l)));
        }
        bits = bits.max(k as u32);
    }
    if bits > MAX_RESOLUTION {
        return Err(Error::ResolutionOverflow(bits));
    }
    let scale = Rational::from_integer(BigInt::one() << bits);
    let mut points = vec![0u32];
    for l in lambda {
        let v = (l * &scale).to_integer().to_u32().ok_or_else(|| Error::Validation("lambda out of range".into()))?;
        points.push(v);
    }
    points.push(1 << bits);
    if points.windows(2).any(|w| w[0] > w[1]) || lambda.iter().any(|l| l.is_negative()) {
        return Err(Error::Validation("lambda must be nondecreasing in [0, 1]".into()));
    }
    let delta = points.windows(2).map(|w| w[1] - w[0]).collect();
    let start = points[..points.len() - 1].to_vec();
    Ok(DyadicWeights { bits, delta, start })
}

/// On slab `t` of every rank-`rank` interval, the copy of `pieces[t]`
/// squeezed by `delta_t`. Pieces share resolution `L`; the output has
/// resolution `L + bits(lambda)`.
pub fn glue(lambda: &[Rational], pieces: &[GridAutomorphism], rank: u32) -> Result<GridAutomorphism> {
    let w = dyadic_weights(lambda)?;
    if pieces.len() != lambda.len() + 1 {
        return Err(Error::Validation(format!("{} weights need {} pieces, got {}", lambda.len(), lambda.len() + 1, pieces.len())));
    }
    let l = pieces[0].g;
    for p in pieces {
        pieces[0].same_resolution(p)?;
    }
    if rank > l || rank == 0 {
        return Err(Error::ResolutionTooCoarse { rank, g: l });
    }
    let g = l + w.bits;
    check_resolution(g)?;
    let block = 1u32 << (g - rank); // cells per rank-`rank` interval
    let sub = l - rank; // log2 of piece cells per interval
    let unit = 1u32 << (g - rank - w.bits); // G-cells per lambda step inside an interval
    let mut perm = vec![0u32; 1 << g];
    for r in 0..1u32 << rank {
        for (t, piece) in pieces.iter().enumerate() {
            let d = w.delta[t]; // D_t = delta_t 2^bits: G-cells per piece cell
            if d == 0 {
                continue;
            }
            let base = r * block + w.start[t] * unit;
            let slab_len = d << sub;
            for wpos in 0..slab_len {
                let u = wpos / d;
                let o = wpos % d;
                let i = (r << sub) + u;
                let j = piece.perm[i as usize];
                let r2 = j >> sub;
                let u2 = j & ((1 << sub) - 1);
                perm[(base + wpos) as usize] = r2 * block + w.start[t] * unit + d * u2 + o;
            }
        }
    }
    GridAutomorphism::new(g, perm)
}

/// `mu(E cap T^(-n) F)`, exact.
pub fn correlation(t: &GridAutomorphism, e: DyadicInterval, f: DyadicInterval, n: &BigInt) -> Result<Rational> {
    for iv in [e, f] {
        if iv.rank > t.g {
            return Err(Error::RankTooFine { rank: iv.rank, g: t.g });
        }
    }
    let p = t.power(n);
    let count = (0..t.size() as u32).filter(|&x| e.contains(x, t.g) && f.contains(p.perm[x as usize], t.g)).count();
    Ok(Rational::new(BigInt::from(count), BigInt::one() << t.g))
}

/// `counts[a][b] = #{x in E_a : P x in F_b}` for rank-`rank` intervals.
fn count_matrix(p: &GridAutomorphism, rank: u32) -> Vec<Vec<u64>> {
    let side = 1usize << rank;
    let mut m = vec![vec![0u64; side]; side];
    let shift = p.g - rank;
    for (x, &y) in p.perm.iter().enumerate() {
        m[x >> shift][(y >> shift) as usize] += 1;
    }
    m
}

/// Coarsens a count matrix to ranks `(re, rf)`.
fn aggregate(m: &[Vec<u64>], rank: u32, re: u32, rf: u32) -> Vec<Vec<u64>> {
    let mut out = vec![vec![0u64; 1 << rf]; 1 << re];
    for (a, row) in m.iter().enumerate() {
        for (b, &c) in row.iter().enumerate() {
            out[a >> (rank - re)][b >> (rank - rf)] += c;
        }
    }
    out
}

/// Largest `|mu(E cap T^(-n) F) - sum_t delta_t mu(E cap T_t^(-n) F)|` over
/// dyadic `E`, `F` of rank at most `test_rank` and `n` in `n_list`.
pub fn verify_convex_identity(
    glued: &GridAutomorphism,
    pieces: &[GridAutomorphism],
    lambda: &[Rational],
    rank: u32,
    test_rank: u32,
    n_list: &[BigInt],
) -> Result<Rational> {
    let w = dyadic_weights(lambda)?;
    if pieces.len() != w.delta.len() || pieces.is_empty() {
        return Err(Error::Validation("piece count does not match lambda".into()));
    }
    let l = pieces[0].g;
    if glued.g != l + w.bits {
        return Err(Error::ResolutionMismatch(glued.g, l + w.bits));
    }
    if test_rank > rank || rank > l {
        return Err(Error::RankTooFine { rank: test_rank, g: rank.min(l) });
    }
    let worst = n_list
        .par_iter()
        .map(|n| {
            let mg = count_matrix(&glued.power(n), test_rank);
            let mts: Vec<Vec<Vec<u64>>> = pieces.iter().map(|p| count_matrix(&p.power(n), test_rank)).collect();
            let mut worst = 0u64;
            for re in 0..=test_rank {
                for rf in 0..=test_rank {
                    let ag = aggregate(&mg, test_rank, re, rf);
                    let ats: Vec<_> = mts.iter().map(|m| aggregate(m, test_rank, re, rf)).collect();
                    for a in 0..ag.len() {
                        for b in 0..ag[a].len() {
                            let mix: u64 = ats.iter().zip(&w.delta).map(|(m, &d)| m[a][b] * d as u64).sum();
                            worst = worst.max(ag[a][b].abs_diff(mix));
                        }
                    }
                }
            }
            worst
        })
        .max()
        .unwrap_or(0);
    Ok(Rational::new(BigInt::from(worst), BigInt::one() << glued.g))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MetricBound {
    pub holds: bool,
    #[serde(with = "crate::arith::serde_rational")]
    pub lhs: Rational,
    #[serde(with = "crate::arith::serde_rational")]
    pub rhs: Rational,
    #[serde(with = "crate::arith::serde_rational")]
    pub slack: Rational,
}

/// Checks `d_{<=rank}(R, glued) <= sum_t delta_t d_{<=rank}(R, T_t)` for a
/// reference `R` at the pieces' resolution that is cyclic on rank-`rank`
/// intervals.
pub fn verify_metric_bound(
    reference: &GridAutomorphism,
    glued: &GridAutomorphism,
    pieces: &[GridAutomorphism],
    lambda: &[Rational],
    rank: u32,
) -> Result<MetricBound> {
    let w = dyadic_weights(lambda)?;
    if pieces.len() != w.delta.len() {
        return Err(Error::Validation("piece count does not match lambda".into()));
    }
    if !reference.is_rank_cyclic(rank) {
        return Err(Error::NotRankCyclic(rank));
    }
    let lifted = reference.refine(glued.g.saturating_sub(reference.g))?;
    let lhs = dyadic_metric(&lifted, glued, rank)?;
    let scale = Rational::new(BigInt::one(), BigInt::one() << w.bits);
    let mut rhs = Rational::zero();
    for (p, &d) in pieces.iter().zip(&w.delta) {
        if d > 0 {
            rhs += dyadic_metric(reference, p, rank)? * Rational::from_integer(BigInt::from(d)) * &scale;
        }
    }
    let slack = &rhs - &lhs;
    Ok(MetricBound { holds: !slack.is_negative(), lhs, rhs, slack })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConjugateSearch {
    #[serde(with = "crate::arith::serde_rational")]
    pub start: Rational,
    #[serde(with = "crate::arith::serde_rational")]
    pub best: Rational,
    pub best_draw: usize,
    pub conjugator: GridAutomorphism,
}

/// Best of `draws` random conjugators `S`, scored by `d_L(target, S^-1 T S)`.
pub fn search_conjugate(
    target: &GridAutomorphism,
    t: &GridAutomorphism,
    l_max: u32,
    draws: usize,
    seed: u64,
) -> Result<ConjugateSearch> {
    target.same_resolution(t)?;
    let start = dyadic_metric(target, t, l_max)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut best = (start.clone(), 0usize, GridAutomorphism::identity(t.g)?);
    for draw in 1..=draws {
        let s = GridAutomorphism::random(t.g, &mut rng)?;
        let d = dyadic_metric(target, &conjugate(t, &s)?, l_max)?;
        if d < best.0 {
            best = (d, draw, s);
        }
    }
    Ok(ConjugateSearch { start, best: best.0, best_draw: best.1, conjugator: best.2 })
}

/// Best of `draws` random cyclic orders of rank-`rank` intervals, scored by
/// `d_L(T, S)`.
pub fn approximate_by_cyclic(
    t: &GridAutomorphism,
    rank: u32,
    l_max: u32,
    draws: usize,
    seed: u64,
) -> Result<(GridAutomorphism, Rational)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    // greedy start: follow where T sends the bulk of each interval
    let width = 1u32 << (t.g - rank);
    let count = 1u32 << rank;
    let mut order = vec![0u32];
    let mut used = vec![false; count as usize];
    used[0] = true;
    while order.len() < count as usize {
        let cur = *order.last().expect("nonempty");
        let mut votes = vec![0u32; count as usize];
        for o in 0..width {
            votes[(t.perm[(cur * width + o) as usize] / width) as usize] += 1;
        }
        let next = (0..count)
            .filter(|&r| !used[r as usize])
            .max_by_key(|&r| (votes[r as usize], std::cmp::Reverse(r)))
            .expect("some interval unused");
        used[next as usize] = true;
        order.push(next);
    }
    let mut best_map = cyclic_from_order(&order, rank, t.g)?;
    let mut best = dyadic_metric(t, &best_map, l_max)?;
    for _ in 0..draws {
        let mut o: Vec<u32> = (0..count).collect();
        o.shuffle(&mut rng);
        let s = cyclic_from_order(&o, rank, t.g)?;
        let d = dyadic_metric(t, &s, l_max)?;
        if d < best {
            best = d;
            best_map = s;
        }
    }
    Ok((best_map, best))
}
