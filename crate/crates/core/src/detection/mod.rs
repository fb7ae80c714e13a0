//! Binary hypothesis testing with rate-limited likelihood-ratio quantizers.
//!
//! A sensor sending `r` bits can report one of `n = 2^r` levels. The value
//! of those bits is `f(n)`, the largest KL divergence `D(Q1 || Q0)` between
//! the quantizer output laws under the two hypotheses, which governs the
//! error exponent of the fusion center's test. [`detection_utility`] turns
//! `f` into a concave utility of the rate for [`crate::num::solve`].

mod density;
mod quantizer;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;

pub use density::{Density, DensityPair, TAIL_MASS};
pub use quantizer::{
    cell_masses, kl_divergence, optimize_thresholds, OptimizedQuantizer,
    QuantizerOutputDistributions, ThresholdVector, STARTS, SWEEP_TOL,
};

use crate::error::{Error, Result};
use crate::num::{upper_concave_envelope, PiecewiseLinear, UtilityFunction};

/// `p1(y) / p0(y)` for the pair.
pub fn likelihood_ratio(pair: &DensityPair, y: f64) -> f64 {
    pair.likelihood_ratio(y)
}

type Key = ([u64; 5], usize);

fn cache() -> &'static Mutex<HashMap<Key, Arc<OptimizedQuantizer>>> {
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<OptimizedQuantizer>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

fn cached(pair: &DensityPair, n: usize) -> Option<Arc<OptimizedQuantizer>> {
    cache().lock().unwrap().get(&(pair.cache_key(), n)).cloned()
}

/// The optimal `n`-level quantizer, memoized per pair and level count.
///
/// When a quantizer with fewer levels is already known, splitting its cells
/// seeds an extra start. Concurrent callers may compute the same entry
/// twice; the cache keeps the better result.
pub fn best_quantizer(pair: &DensityPair, n: usize) -> Result<Arc<OptimizedQuantizer>> {
    if let Some(q) = cached(pair, n) {
        return Ok(q);
    }
    let warm = {
        let map = cache().lock().unwrap();
        let key = pair.cache_key();
        (1..n)
            .rev()
            .find_map(|m| map.get(&(key, m)).cloned())
    };
    let q = quantizer::optimize_with_warm_start(pair, n, warm.as_ref().map(|w| &w.cuts[..]))?;
    Ok(insert(pair, n, q))
}

/// Stores `q` unless a better quantizer is already cached.
fn insert(pair: &DensityPair, n: usize, q: OptimizedQuantizer) -> Arc<OptimizedQuantizer> {
    let mut map = cache().lock().unwrap();
    let slot = map.entry((pair.cache_key(), n)).or_insert_with(|| Arc::new(q.clone()));
    if q.divergence > slot.divergence {
        *slot = Arc::new(q);
    }
    slot.clone()
}

/// `f(n)`: the largest KL divergence reachable with `n` levels.
pub fn max_divergence(pair: &DensityPair, n: usize) -> Result<f64> {
    Ok(best_quantizer(pair, n)?.divergence)
}

/// `f(1), .., f(n_max)`, nondecreasing.
pub fn divergence_curve(pair: &DensityPair, n_max: usize) -> Result<Vec<f64>> {
    let mut solver = quantizer::LevelOptimizer::new(pair, n_max);
    let mut prev: Option<Arc<OptimizedQuantizer>> = None;
    let mut curve = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let q = match cached(pair, n) {
            Some(q) if prev.as_ref().map_or(true, |p| q.divergence >= p.divergence) => q,
            _ => {
                let q = solver.solve(n, prev.as_ref().map(|p| &p.cuts[..]))?;
                insert(pair, n, q)
            }
        };
        curve.push(q.divergence);
        prev = Some(q);
    }
    Ok(curve)
}

/// A tabulated detection utility.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionUtility {
    pub utility: UtilityFunction,
    /// `f(2^r)` for `r = 0..=r_max`.
    pub table: Vec<f64>,
    /// Set when the table was not concave in `r` and the utility is its upper
    /// concave envelope instead.
    pub envelope_adjusted: bool,
}

/// `g(r) = f(2^r)` at integer rates `0..=r_max`, linearly interpolated and
/// replaced by its upper concave envelope, constant past `r_max`.
pub fn detection_utility(pair: &DensityPair, r_max: u32) -> Result<DetectionUtility> {
    let table = rate_table(pair, r_max)?;
    let points: Vec<(f64, f64)> = table
        .iter()
        .enumerate()
        .map(|(r, &f)| (r as f64, f))
        .collect();
    let (hull, envelope_adjusted) = upper_concave_envelope(&points);
    let (rates, values) = hull.into_iter().unzip();
    let pl = PiecewiseLinear::new(rates, values).map_err(Error::InvalidInput)?;
    Ok(DetectionUtility {
        utility: UtilityFunction::PiecewiseLinear(pl),
        table,
        envelope_adjusted,
    })
}

/// Largest rate a detection table is built for.
pub const MAX_TABULATED_RATE: u32 = 10;

fn rate_table(pair: &DensityPair, r_max: u32) -> Result<Vec<f64>> {
    if r_max > MAX_TABULATED_RATE {
        return Err(Error::InvalidInput(format!(
            "rate {r_max} exceeds the tabulated maximum {MAX_TABULATED_RATE}"
        )));
    }
    (0..=r_max).map(|r| max_divergence(pair, 1usize << r)).collect()
}

/// `sum_j f_j(2^rates[j])` from the exact tabulated values. Rates above
/// [`MAX_TABULATED_RATE`] are scored at that rate.
pub fn total_kl(pairs: &[DensityPair], rates: &[u32]) -> Result<f64> {
    if pairs.len() != rates.len() {
        return Err(Error::InvalidInput(format!(
            "{} density pairs but {} rates",
            pairs.len(),
            rates.len()
        )));
    }
    pairs
        .iter()
        .zip(rates)
        .map(|(p, &r)| max_divergence(p, 1 << r.min(MAX_TABULATED_RATE)))
        .sum()
}
