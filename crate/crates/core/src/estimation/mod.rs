//! Least-squares estimation from uniformly quantized linear measurements.
//!
//! Sensor `i` observes `y_i = a_i . x + eta_i` with bounded zero-mean noise,
//! quantizes it with `r_i` bits over a fixed input range, and the fusion
//! center forms `x_hat = pinv(A) d`. Modeling the quantization error as
//! uncorrelated with variance `step^2 / 12` gives
//!
//! ```text
//! E|x_hat - x|^2 ~= sum_i (sigma^2 + step_i^2 / 12) |pinv(A)[:, i]|^2,   step_i = (hi - lo) / 2^r_i
//! ```
//!
//! so only the `4^-r_i` terms depend on the allocation.

mod monte_carlo;
mod quantize;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::UtilityFunction;

pub use monte_carlo::{monte_carlo_mse, MonteCarloEstimate};
pub use quantize::{quantize, QuantizedObservation, QuantizerRange};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Linear sensing model with uniform noise and a uniform quantizer.
#[derive(Debug, Clone)]
pub struct SensingModel {
    matrix: DMatrix<f64>,
    pinv: DMatrix<f64>,
    noise_half_width: f64,
    noise_variance: f64,
    range: QuantizerRange,
}

/// Computes the Moore-Penrose pseudoinverse of a full-column-rank matrix
/// through its singular value decomposition.
pub fn pseudoinverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() < a.ncols() || a.ncols() == 0 {
        return Err(Error::InvalidInput(format!(
            "sensing matrix is {}x{}; need at least as many sensors as unknowns",
            a.nrows(),
            a.ncols()
        )));
    }
    let svd = a.clone().svd(true, true);
    let largest = svd.singular_values.max();
    let smallest = svd.singular_values.min();
    if !(largest > 0.0) || smallest <= RANK_TOL * largest {
        return Err(Error::SingularModel { smallest, largest });
    }
    svd.pseudo_inverse(0.0)
        .map_err(|e| Error::InvalidInput(e.to_string()))
}

impl SensingModel {
    /// `noise_half_width` is `w` for noise uniform on `[-w, w]`; its variance
    /// `w^2 / 3` is stored alongside.
    pub fn new(matrix: DMatrix<f64>, noise_half_width: f64, range: QuantizerRange) -> Result<Self> {
        if !(noise_half_width.is_finite() && noise_half_width >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "noise half-width {noise_half_width} must be finite and nonnegative"
            )));
        }
        range.check()?;
        let pinv = pseudoinverse(&matrix)?;
        Ok(SensingModel {
            matrix,
            pinv,
            noise_half_width,
            noise_variance: noise_half_width * noise_half_width / 3.0,
            range,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn pinv(&self) -> &DMatrix<f64> {
        &self.pinv
    }

    pub fn num_sensors(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn noise_half_width(&self) -> f64 {
        self.noise_half_width
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn range(&self) -> QuantizerRange {
        self.range
    }

    /// `|pinv(A)[:, i]|^2` for every sensor.
    pub fn column_weights(&self) -> Vec<f64> {
        self.pinv.column_iter().map(|c| c.norm_squared()).collect()
    }

    /// Noise floor of the estimator, reached when every sensor has unlimited
    /// bits: `sigma^2 * sum_i |pinv(A)[:, i]|^2`.
    pub fn noise_floor(&self) -> f64 {
        self.noise_variance * self.column_weights().iter().sum::<f64>()
    }

    /// Per-sensor utilities `g_i(r) = -|pinv(A)[:, i]|^2 (hi - lo)^2 / 12 * 4^-r`.
    ///
    /// Their sum at rates `r` is `noise_floor() - predict_mse(r)`.
    pub fn utilities(&self) -> Vec<UtilityFunction> {
        let spread = self.range.width().powi(2) / 12.0;
        self.column_weights()
            .into_iter()
            .map(|w| UtilityFunction::ExponentialDecay { weight: w * spread })
            .collect()
    }

    /// Approximate mean squared error of `x_hat` at the given bit allocation.
    pub fn predict_mse(&self, rates: &[u32]) -> f64 {
        assert_eq!(rates.len(), self.num_sensors(), "one rate per sensor");
        self.column_weights()
            .iter()
            .zip(rates)
            .map(|(w, &r)| {
                let step = self.range.step(r);
                (self.noise_variance + step * step / 12.0) * w
            })
            .sum()
    }

    /// Least-squares estimate `pinv(A) d`.
    pub fn estimate(&self, d: &[f64]) -> Vec<f64> {
        assert_eq!(d.len(), self.num_sensors(), "one measurement per sensor");
        (&self.pinv * DVector::from_column_slice(d))
            .iter()
            .copied()
            .collect()
    }
}

/// Free-function form of [`SensingModel::utilities`].
pub fn estimation_utilities(model: &SensingModel) -> Vec<UtilityFunction> {
    model.utilities()
}

/// Free-function form of [`SensingModel::predict_mse`].
pub fn predict_mse(model: &SensingModel, rates: &[u32]) -> f64 {
    model.predict_mse(rates)
}

/// `n_sensors x dim` matrix with i.i.d. uniform(0, 1) entries whose first
/// `weak_count` rows are multiplied by `alpha`. The unscaled draw depends only
/// on `seed`, so varying `alpha` rescales the same matrix.
pub fn make_sensing_matrix(
    n_sensors: usize,
    dim: usize,
    weak_count: usize,
    alpha: f64,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if weak_count > n_sensors {
        return Err(Error::InvalidInput(format!(
            "{weak_count} weak sensors out of {n_sensors}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // row-major draw order so the matrix reads like the sequence
    let mut m = DMatrix::zeros(n_sensors, dim);
    for i in 0..n_sensors {
        for j in 0..dim {
            m[(i, j)] = rng.random::<f64>();
        }
    }
    for i in 0..weak_count {
        m.row_mut(i).scale_mut(alpha);
    }
    Ok(m)
}

/// Generator parameters for a sensing model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingSpec {
    pub dim: usize,
    pub weak_count: usize,
    pub noise_half_width: f64,
    pub range: QuantizerRange,
}

#[cfg(test)]
mod tests;
