//! Likelihood-ratio quantizers and the search for the divergence-maximizing
//! one.
//!
//! For the supported pairs `L(y)` is monotone, so the cells of a
//! likelihood-ratio quantizer are consecutive intervals of the observation
//! axis. The search therefore runs over `n - 1` ordered cut points in `y`
//! rather than over thresholds on `[0, inf]`.

use serde::Serialize;

use super::density::DensityPair;
use crate::error::{Error, Result};

/// Thresholds `0 = t_0 <= t_1 <= .. <= t_{n-1} <= t_n = inf` on the
/// likelihood-ratio axis. Cell `l` (1-based) collects observations with
/// `L(y)` in `[t_{l-1}, t_l]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdVector(Vec<f64>);

impl ThresholdVector {
    pub fn new(t: Vec<f64>) -> Result<Self> {
        let ok = t.len() >= 2
            && t[0] == 0.0
            && *t.last().unwrap() == f64::INFINITY
            && t.windows(2).all(|w| w[0] <= w[1])
            && t.iter().all(|x| !x.is_nan());
        if ok {
            Ok(ThresholdVector(t))
        } else {
            Err(Error::InvalidInput(format!(
                "thresholds must run 0 = t_0 <= .. <= t_n = inf, got {t:?}"
            )))
        }
    }

    /// The single-cell quantizer.
    pub fn trivial() -> Self {
        ThresholdVector(vec![0.0, f64::INFINITY])
    }

    pub fn levels(&self) -> usize {
        self.0.len() - 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Laws of the quantizer output under each hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantizerOutputDistributions {
    pub q0: Vec<f64>,
    pub q1: Vec<f64>,
}

/// Cell probabilities of the likelihood-ratio quantizer with thresholds `t`.
///
/// When `L` is constant every observation falls in the first cell whose
/// closed interval contains that constant.
pub fn cell_masses(pair: &DensityPair, t: &ThresholdVector) -> QuantizerOutputDistributions {
    let n = t.levels();
    let t = t.as_slice();
    let (mut q0, mut q1) = (vec![0.0; n], vec![0.0; n]);
    let (slope, intercept) = pair.log_ratio_line();
    if slope == 0.0 {
        let c = intercept.exp();
        let l = (1..=n).find(|&l| t[l - 1] <= c && c <= t[l]).unwrap_or(n);
        q0[l - 1] = 1.0;
        q1[l - 1] = 1.0;
        return QuantizerOutputDistributions { q0, q1 };
    }
    let y: Vec<f64> = t
        .iter()
        .map(|&x| pair.observation_at_ratio(x).expect("non-constant ratio"))
        .collect();
    for l in 0..n {
        let (a, b) = if y[l] <= y[l + 1] {
            (y[l], y[l + 1])
        } else {
            (y[l + 1], y[l])
        };
        q0[l] = pair.h0().mass(a, b);
        q1[l] = pair.h1().mass(a, b);
    }
    QuantizerOutputDistributions { q0, q1 }
}

/// `D(q1 || q0) = sum_l q1[l] ln(q1[l] / q0[l])`, with `0 ln(0 / .) = 0` and
/// `+inf` when `q1` puts mass where `q0` has none.
pub fn kl_divergence(q1: &[f64], q0: &[f64]) -> f64 {
    q1.iter().zip(q0).map(|(&p, &q)| kl_term(p, q)).sum()
}

#[inline]
fn kl_term(p: f64, q: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else if q <= 0.0 {
        f64::INFINITY
    } else {
        p * (p / q).ln()
    }
}

/// Best quantizer found for a pair and level count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizedQuantizer {
    /// Increasing cut points on the observation axis.
    pub cuts: Vec<f64>,
    pub thresholds: ThresholdVector,
    /// `D(Q1 || Q0)` of the quantizer output.
    pub divergence: f64,
}

/// Number of spread-out starting points tried by [`optimize_thresholds`]
/// for up to [`SPREAD_START_LEVELS`] levels.
pub const STARTS: usize = 8;
/// Largest level count that also runs the spread-out starts.
pub const SPREAD_START_LEVELS: usize = 16;
/// A coordinate sweep improving the divergence by less than this ends a run.
pub const SWEEP_TOL: f64 = 1e-7;
/// Minimum number of candidate cuts in the grid search.
pub const GRID_POINTS: usize = 2048;
const GOLDEN_STEPS: usize = 64;
const MAX_SWEEPS: usize = 20_000;

/// Maximizes `D(Q1 || Q0)` over `n`-level likelihood-ratio quantizers.
///
/// The best partition of a fine grid of cut points is found exactly by
/// dynamic programming, then polished by coordinate ascent over the cut
/// points, each coordinate by golden-section search between its neighbours.
/// Up to [`SPREAD_START_LEVELS`] levels, [`STARTS`] spread-out starting
/// vectors are polished as well; the best local optimum wins.
pub fn optimize_thresholds(pair: &DensityPair, n: usize) -> Result<OptimizedQuantizer> {
    optimize_with_warm_start(pair, n, None)
}

pub(crate) fn optimize_with_warm_start(
    pair: &DensityPair,
    n: usize,
    warm: Option<&[f64]>,
) -> Result<OptimizedQuantizer> {
    if n == 0 {
        return Err(Error::InvalidInput("a quantizer needs at least one level".into()));
    }
    LevelOptimizer::new(pair, n).solve(n, warm)
}

/// Solves a run of level counts for one pair, sharing one grid search.
pub(crate) struct LevelOptimizer<'a> {
    search: Search<'a>,
    grid: Option<GridPartition>,
    n_max: usize,
}

impl<'a> LevelOptimizer<'a> {
    pub(crate) fn new(pair: &'a DensityPair, n_max: usize) -> Self {
        LevelOptimizer {
            search: Search::new(pair),
            grid: None,
            n_max,
        }
    }

    /// The `n`-level optimum, `n <= n_max`, also polishing `warm` split
    /// up to `n` levels, so the result is never below `warm`'s divergence.
    pub(crate) fn solve(&mut self, n: usize, warm: Option<&[f64]>) -> Result<OptimizedQuantizer> {
        if n == 0 || n > self.n_max {
            return Err(Error::InvalidInput(format!(
                "level count {n} outside 1..={}",
                self.n_max
            )));
        }
        if n == 1 || self.search.pair.is_degenerate() {
            return Ok(self.search.trivial(n));
        }
        let search = &self.search;
        let n_max = self.n_max;
        let grid = self.grid.get_or_insert_with(|| GridPartition::new(search, n_max));
        Ok(search.polish(n, grid.cuts(n), warm))
    }
}

/// Exact best partitions of a fixed grid into `1..=levels` cells.
///
/// The cells are consecutive runs of elementary intervals between grid
/// points. For likelihood-ratio-ordered intervals the KL cell score has the
/// Monge property, so the optimal split index is monotone and each layer of
/// the recursion is solved by divide and conquer.
struct GridPartition {
    /// Boundaries: `-inf`, the grid points, `+inf`.
    edges: Vec<f64>,
    /// `choice[k][j]`: start of the last cell in the best `k + 1`-cell
    /// partition of edges `0..=j`.
    choice: Vec<Vec<u32>>,
}

impl GridPartition {
    fn new(search: &Search, levels: usize) -> Self {
        Self::with_points(search, levels, GRID_POINTS.max(4 * levels))
    }

    fn with_points(search: &Search, levels: usize, m: usize) -> Self {
        let mut edges = Vec::with_capacity(m + 2);
        edges.push(f64::NEG_INFINITY);
        edges.extend((0..m).map(|i| search.lo + (search.hi - search.lo) * i as f64 / (m - 1) as f64));
        edges.push(f64::INFINITY);
        let last = edges.len() - 1;

        let (h0, h1) = (search.pair.h0(), search.pair.h1());
        let m0 = CumulativeMass::new(&edges, |a, b| h0.mass(a, b));
        let m1 = CumulativeMass::new(&edges, |a, b| h1.mass(a, b));
        let score = |i: usize, j: usize| kl_term(m1.between(i, j), m0.between(i, j));

        let mut best: Vec<f64> = (0..=last).map(|j| score(0, j)).collect();
        let mut choice = vec![vec![0u32; last + 1]];
        for k in 1..levels.min(last) {
            let mut next = vec![f64::NEG_INFINITY; last + 1];
            let mut pick = vec![0u32; last + 1];
            layer(&best, &score, k + 1, last, k, last - 1, &mut next, &mut pick);
            best = next;
            choice.push(pick);
        }
        GridPartition { edges, choice }
    }

    /// Interior cut points of the best `n`-cell grid partition.
    fn cuts(&self, n: usize) -> Vec<f64> {
        let n = n.min(self.choice.len());
        let mut j = self.edges.len() - 1;
        let mut cuts = Vec::with_capacity(n - 1);
        for k in (1..n).rev() {
            j = self.choice[k][j] as usize;
            cuts.push(self.edges[j]);
        }
        cuts.reverse();
        cuts
    }
}

/// Masses of runs of elementary cells, summed from whichever end keeps
/// small tail masses free of cancellation.
struct CumulativeMass {
    below: Vec<f64>,
    above: Vec<f64>,
}

impl CumulativeMass {
    fn new(edges: &[f64], mass: impl Fn(f64, f64) -> f64) -> Self {
        let n = edges.len();
        let cells: Vec<f64> = edges.windows(2).map(|w| mass(w[0], w[1])).collect();
        let mut below = vec![0.0; n];
        let mut above = vec![0.0; n];
        for j in 1..n {
            below[j] = below[j - 1] + cells[j - 1];
        }
        for j in (0..n - 1).rev() {
            above[j] = above[j + 1] + cells[j];
        }
        CumulativeMass { below, above }
    }

    fn between(&self, i: usize, j: usize) -> f64 {
        if self.below[j] <= 0.5 {
            self.below[j] - self.below[i]
        } else if self.above[i] <= 0.5 {
            self.above[i] - self.above[j]
        } else {
            (1.0 - self.below[i] - self.above[j]).max(0.0)
        }
    }
}

/// Fills `next[j] = max_{i < j} best[i] + score(i, j)` for `j` in
/// `lo..=hi`, knowing the maximizer lies in `opt_lo..=opt_hi`.
#[allow(clippy::too_many_arguments)]
fn layer(
    best: &[f64],
    score: &impl Fn(usize, usize) -> f64,
    lo: usize,
    hi: usize,
    opt_lo: usize,
    opt_hi: usize,
    next: &mut [f64],
    pick: &mut [u32],
) {
    if lo > hi {
        return;
    }
    let mid = (lo + hi) / 2;
    let mut arg = opt_lo;
    let mut val = f64::NEG_INFINITY;
    for i in opt_lo..=opt_hi.min(mid - 1) {
        let v = best[i] + score(i, mid);
        if v > val {
            val = v;
            arg = i;
        }
    }
    next[mid] = val;
    pick[mid] = arg as u32;
    if mid > lo {
        layer(best, score, lo, mid - 1, opt_lo, arg, next, pick);
    }
    layer(best, score, mid + 1, hi, arg, opt_hi, next, pick);
}

/// Extends an optimal cut set for fewer levels to `n - 1` cuts by splitting
/// the cells with the most `H1` mass at their midpoints. Splitting a cell
/// never lowers the divergence.
fn refine_to(warm: &[f64], n: usize, search: &Search) -> Vec<f64> {
    let mut cuts: Vec<f64> = warm.to_vec();
    while cuts.len() + 1 < n {
        let bounds = search.cell_bounds(&cuts);
        let (k, _) = bounds
            .iter()
            .enumerate()
            .map(|(k, &(a, b))| (k, search.pair.h1().mass(a, b)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one cell");
        let (a, b) = bounds[k];
        let (a, b) = (a.max(search.lo), b.min(search.hi));
        cuts.insert(k, 0.5 * (a + b));
    }
    cuts.truncate(n - 1);
    cuts
}

/// Radical inverse in base 2, the first Sobol coordinate.
fn van_der_corput(mut i: u64) -> f64 {
    let mut x = 0.0;
    let mut base = 0.5;
    while i > 0 {
        if i & 1 == 1 {
            x += base;
        }
        i >>= 1;
        base *= 0.5;
    }
    x
}

#[derive(Clone, Copy)]
enum Placement {
    Uniform,
    Mixture,
}

struct Search<'a> {
    pair: &'a DensityPair,
    lo: f64,
    hi: f64,
}

impl<'a> Search<'a> {
    fn new(pair: &'a DensityPair) -> Self {
        let (lo, hi) = pair.search_interval();
        Search { pair, lo, hi }
    }

    /// `n - 1` increasing cuts at positions `(i - 1 + offset) / (n - 1)` of
    /// either the search interval or the equal-weight mixture's quantiles.
    fn spread(&self, n: usize, offset: f64, placement: Placement) -> Vec<f64> {
        let m = n.saturating_sub(1);
        (1..=m)
            .map(|i| {
                let u = (i as f64 - 1.0 + offset) / m as f64;
                match placement {
                    Placement::Uniform => self.lo + u * (self.hi - self.lo),
                    Placement::Mixture => {
                        let cdf = |y: f64| 0.5 * (self.pair.h0().cdf(y) + self.pair.h1().cdf(y));
                        super::density::bisect(self.lo, self.hi, |y| cdf(y) < u)
                    }
                }
            })
            .collect()
    }

    fn trivial(&self, n: usize) -> OptimizedQuantizer {
        let cuts = self.spread(n, 0.5, Placement::Uniform);
        self.finish(cuts, 0.0)
    }

    fn polish(&self, n: usize, grid: Vec<f64>, warm: Option<&[f64]>) -> OptimizedQuantizer {
        let mut starts = vec![grid];
        if let Some(w) = warm {
            starts.push(refine_to(w, n, self));
        }
        if n <= SPREAD_START_LEVELS {
            starts.extend((0..STARTS).map(|j| {
                let offset = 0.05 + 0.9 * van_der_corput(j as u64 + 1);
                let placement = if j % 2 == 0 {
                    Placement::Mixture
                } else {
                    Placement::Uniform
                };
                self.spread(n, offset, placement)
            }));
        }
        let mut best: Option<(Vec<f64>, f64)> = None;
        for start in starts {
            let (cuts, value) = self.ascend(start);
            if best.as_ref().map_or(true, |(_, b)| value > *b) {
                best = Some((cuts, value));
            }
        }
        let (cuts, value) = best.expect("at least one start");
        self.finish(cuts, value)
    }

    fn cell_bounds(&self, cuts: &[f64]) -> Vec<(f64, f64)> {
        let mut edges = Vec::with_capacity(cuts.len() + 2);
        edges.push(f64::NEG_INFINITY);
        edges.extend_from_slice(cuts);
        edges.push(f64::INFINITY);
        edges.windows(2).map(|w| (w[0], w[1])).collect()
    }

    fn term(&self, a: f64, b: f64) -> f64 {
        kl_term(self.pair.h1().mass(a, b), self.pair.h0().mass(a, b))
    }

    fn value(&self, cuts: &[f64]) -> f64 {
        self.cell_bounds(cuts)
            .into_iter()
            .map(|(a, b)| self.term(a, b))
            .sum()
    }

    /// Coordinate ascent until a sweep gains less than [`SWEEP_TOL`].
    fn ascend(&self, mut cuts: Vec<f64>) -> (Vec<f64>, f64) {
        let m = cuts.len();
        let mut value = self.value(&cuts);
        for _ in 0..MAX_SWEEPS {
            for i in 0..m {
                let left = if i == 0 { f64::NEG_INFINITY } else { cuts[i - 1] };
                let right = if i + 1 == m { f64::INFINITY } else { cuts[i + 1] };
                let local = |x: f64| self.term(left, x) + self.term(x, right);
                let a = left.max(self.lo);
                let b = right.min(self.hi);
                let current = local(cuts[i]);
                let x = golden_max(a, b, &local);
                if local(x) > current {
                    cuts[i] = x;
                }
            }
            let next = self.value(&cuts);
            let gain = next - value;
            value = next.max(value);
            if gain < SWEEP_TOL {
                break;
            }
        }
        (cuts, value)
    }

    fn finish(&self, cuts: Vec<f64>, divergence: f64) -> OptimizedQuantizer {
        let mut t: Vec<f64> = cuts
            .iter()
            .map(|&y| self.pair.likelihood_ratio(y))
            .collect();
        t.sort_by(f64::total_cmp);
        let mut full = Vec::with_capacity(t.len() + 2);
        full.push(0.0);
        full.extend(t);
        full.push(f64::INFINITY);
        OptimizedQuantizer {
            cuts,
            thresholds: ThresholdVector(full),
            divergence,
        }
    }
}

fn golden_max(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_STEPS {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        c
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain `O(n M^2)` recursion over the same grid.
    fn naive(edges: &[f64], pair: &DensityPair, cells: usize) -> f64 {
        let last = edges.len() - 1;
        let score = |i: usize, j: usize| {
            kl_term(pair.h1().mass(edges[i], edges[j]), pair.h0().mass(edges[i], edges[j]))
        };
        let mut best: Vec<f64> = (0..=last).map(|j| score(0, j)).collect();
        for k in 1..cells {
            best = (0..=last)
                .map(|j| {
                    (k..j)
                        .map(|i| best[i] + score(i, j))
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect();
        }
        best[last]
    }

    #[test]
    fn divide_and_conquer_layers_match_plain_recursion() {
        for pair in [
            DensityPair::gaussian(0.0, 3.0, 1.0).unwrap(),
            DensityPair::exponential(0.5, 1.0).unwrap(),
            DensityPair::gaussian(2.0, -1.0, 0.3).unwrap(),
        ] {
            let search = Search::new(&pair);
            let grid = GridPartition::with_points(&search, 6, 150);
            for n in 1..=6 {
                let cuts = grid.cuts(n);
                assert_eq!(cuts.len(), n - 1);
                let got = search.value(&cuts);
                let want = naive(&grid.edges, &pair, n);
                assert!((got - want).abs() < 1e-12, "{pair:?} n={n}: {got} vs {want}");
            }
        }
    }
}
