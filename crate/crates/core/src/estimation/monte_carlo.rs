use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::Serialize;

use super::{quantize, SensingModel};

/// Sample mean of the squared estimation error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub mse: f64,
    /// Standard error of `mse`; `None` with fewer than two runs.
    pub stderr: Option<f64>,
    pub runs: usize,
}

/// Draws `x ~ N(0, I)` and uniform noise, quantizes `y = A x + eta` at the
/// given bit allocation, and averages `|pinv(A) d - x|^2` over `runs` draws.
///
/// Run `k` uses its own ChaCha stream `k` under `seed`, so the result does
/// not depend on how runs are scheduled.
pub fn monte_carlo_mse(
    model: &SensingModel,
    rates: &[u32],
    runs: usize,
    seed: u64,
) -> MonteCarloEstimate {
    assert!(runs >= 1, "at least one run");
    assert_eq!(rates.len(), model.num_sensors(), "one rate per sensor");
    let errors: Vec<f64> = (0..runs)
        .map(|run| squared_error(model, rates, seed, run as u64))
        .collect();

    let n = runs as f64;
    let mse = errors.iter().sum::<f64>() / n;
    let stderr = (runs > 1).then(|| {
        let var = errors.iter().map(|e| (e - mse).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    });
    MonteCarloEstimate { mse, stderr, runs }
}

fn squared_error(model: &SensingModel, rates: &[u32], seed: u64, run: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    let w = model.noise_half_width();
    let x: Vec<f64> = (0..model.dim())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let noise = (w > 0.0).then(|| Uniform::new_inclusive(-w, w).expect("finite bounds"));
    let range = model.range();
    let d: Vec<f64> = model
        .matrix()
        .row_iter()
        .zip(rates)
        .map(|(row, &bits)| {
            let clean: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
            let eta = noise.as_ref().map_or(0.0, |u| u.sample(&mut rng));
            quantize(clean + eta, bits, range).value
        })
        .collect();
    model
        .estimate(&d)
        .iter()
        .zip(&x)
        .map(|(a, b)| (a - b).powi(2))
        .sum()
}
