use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A scalar observation density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Density {
    Gaussian { mean: f64, variance: f64 },
    Exponential { rate: f64 },
}

impl Density {
    pub fn gaussian(mean: f64, variance: f64) -> Self {
        Density::Gaussian { mean, variance }
    }

    pub fn exponential(rate: f64) -> Self {
        Density::Exponential { rate }
    }

    pub(crate) fn check(&self) -> Result<()> {
        let ok = match *self {
            Density::Gaussian { mean, variance } => {
                mean.is_finite() && variance.is_finite() && variance > 0.0
            }
            Density::Exponential { rate } => rate.is_finite() && rate > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("bad density parameters: {self:?}")))
        }
    }

    pub fn pdf(&self, y: f64) -> f64 {
        match *self {
            Density::Gaussian { mean, variance } => {
                (-(y - mean).powi(2) / (2.0 * variance)).exp() / (2.0 * PI * variance).sqrt()
            }
            Density::Exponential { rate } => {
                if y < 0.0 {
                    0.0
                } else {
                    rate * (-rate * y).exp()
                }
            }
        }
    }

    /// `P(Y <= y)`.
    pub fn cdf(&self, y: f64) -> f64 {
        match *self {
            Density::Gaussian { mean, variance } => {
                0.5 * libm::erfc(-(y - mean) * FRAC_1_SQRT_2 / variance.sqrt())
            }
            Density::Exponential { rate } => {
                if y <= 0.0 {
                    0.0
                } else {
                    -(-rate * y).exp_m1()
                }
            }
        }
    }

    /// `P(Y > y)`, accurate in the upper tail.
    pub fn sf(&self, y: f64) -> f64 {
        match *self {
            Density::Gaussian { mean, variance } => {
                0.5 * libm::erfc((y - mean) * FRAC_1_SQRT_2 / variance.sqrt())
            }
            Density::Exponential { rate } => {
                if y <= 0.0 {
                    1.0
                } else {
                    (-rate * y).exp()
                }
            }
        }
    }

    /// `P(a < Y <= b)`, computed from whichever tail avoids cancellation.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        if !(b > a) {
            return 0.0;
        }
        match *self {
            Density::Gaussian { mean, .. } => {
                if a >= mean {
                    self.sf(a) - self.sf(b)
                } else if b <= mean {
                    self.cdf(b) - self.cdf(a)
                } else {
                    1.0 - self.cdf(a) - self.sf(b)
                }
            }
            Density::Exponential { rate } => {
                let (a, b) = (a.max(0.0), b.max(0.0));
                if b <= a {
                    return 0.0;
                }
                if b == f64::INFINITY {
                    (-rate * a).exp()
                } else {
                    (-rate * a).exp() * -(-rate * (b - a)).exp_m1()
                }
            }
        }
    }

    /// Smallest `y` with `P(Y <= y) >= p` for small `p`, and largest `y` with
    /// `P(Y > y) >= p`: the interval holding all but `2p` of the mass.
    pub(crate) fn central_interval(&self, p: f64) -> (f64, f64) {
        match *self {
            Density::Gaussian { mean, variance } => {
                let sd = variance.sqrt();
                // sf(mean + z sd) = p, solved on the standard normal
                let z = bisect(0.0, 40.0, |z| 0.5 * libm::erfc(z * FRAC_1_SQRT_2) > p);
                (mean - z * sd, mean + z * sd)
            }
            Density::Exponential { rate } => (0.0, -p.ln() / rate),
        }
    }

    /// Left end of the support.
    pub(crate) fn support_min(&self) -> f64 {
        match self {
            Density::Gaussian { .. } => f64::NEG_INFINITY,
            Density::Exponential { .. } => 0.0,
        }
    }
}

/// Finds the boundary of `pred` on `[lo, hi]`, assuming `pred(lo)` holds and
/// flips once.
pub(crate) fn bisect(mut lo: f64, mut hi: f64, pred: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Observation laws of one sensor under `H0` and `H1`.
///
/// Only pairs with a monotone likelihood ratio are accepted: two Gaussians
/// with a common variance, or two exponentials. The log-likelihood ratio is
/// then `slope * y + intercept` on the common support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPair")]
pub struct DensityPair {
    h0: Density,
    h1: Density,
}

#[derive(Deserialize)]
struct RawPair {
    h0: Density,
    h1: Density,
}

impl TryFrom<RawPair> for DensityPair {
    type Error = Error;

    fn try_from(raw: RawPair) -> Result<Self> {
        DensityPair::new(raw.h0, raw.h1)
    }
}

/// Mass left outside the threshold search interval.
pub const TAIL_MASS: f64 = 1e-8;

impl DensityPair {
    pub fn new(h0: Density, h1: Density) -> Result<Self> {
        h0.check()?;
        h1.check()?;
        match (h0, h1) {
            (Density::Gaussian { variance: v0, .. }, Density::Gaussian { variance: v1, .. })
                if v0 != v1 =>
            {
                Err(Error::InvalidInput(format!(
                    "Gaussian pair with variances {v0} and {v1} has a non-monotone likelihood ratio"
                )))
            }
            (Density::Gaussian { .. }, Density::Gaussian { .. })
            | (Density::Exponential { .. }, Density::Exponential { .. }) => {
                let pair = DensityPair { h0, h1 };
                pair.check_normalized()?;
                Ok(pair)
            }
            _ => Err(Error::InvalidInput(
                "H0 and H1 must come from the same family".into(),
            )),
        }
    }

    pub fn gaussian(mean0: f64, mean1: f64, variance: f64) -> Result<Self> {
        Self::new(Density::gaussian(mean0, variance), Density::gaussian(mean1, variance))
    }

    pub fn exponential(rate0: f64, rate1: f64) -> Result<Self> {
        Self::new(Density::exponential(rate0), Density::exponential(rate1))
    }

    pub fn h0(&self) -> Density {
        self.h0
    }

    pub fn h1(&self) -> Density {
        self.h1
    }

    /// Integrates both densities over the search interval with Simpson's rule
    /// and requires `1 - TAIL_MASS` within `1e-6`.
    fn check_normalized(&self) -> Result<()> {
        let (lo, hi) = self.search_interval();
        let n = 20_000;
        let h = (hi - lo) / n as f64;
        for d in [self.h0, self.h1] {
            let mut sum = d.pdf(lo) + d.pdf(hi);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                sum += w * d.pdf(lo + i as f64 * h);
            }
            let integral = sum * h / 3.0;
            if (integral - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidInput(format!(
                    "{d:?} integrates to {integral} over [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    /// `(slope, intercept)` of the log-likelihood ratio on the support.
    pub(crate) fn log_ratio_line(&self) -> (f64, f64) {
        match (self.h0, self.h1) {
            (
                Density::Gaussian { mean: m0, variance },
                Density::Gaussian { mean: m1, .. },
            ) => ((m1 - m0) / variance, (m0 * m0 - m1 * m1) / (2.0 * variance)),
            (Density::Exponential { rate: l0 }, Density::Exponential { rate: l1 }) => {
                (l0 - l1, (l1 / l0).ln())
            }
            _ => unreachable!("mixed families are rejected on construction"),
        }
    }

    /// Whether the two laws coincide, so every quantizer has zero divergence.
    pub fn is_degenerate(&self) -> bool {
        self.h0 == self.h1
    }

    /// `p1(y) / p0(y)`: zero where only `p0` is positive, infinite where only
    /// `p1` is. Outside both supports the ratio is undefined and `1` is
    /// returned.
    pub fn likelihood_ratio(&self, y: f64) -> f64 {
        if y < self.h0.support_min() {
            return 1.0;
        }
        let (slope, intercept) = self.log_ratio_line();
        (slope * y + intercept).exp()
    }

    /// Interval holding all but [`TAIL_MASS`] of the mass under each
    /// hypothesis. Thresholds are searched inside it.
    pub fn search_interval(&self) -> (f64, f64) {
        let (a0, b0) = self.h0.central_interval(TAIL_MASS / 2.0);
        let (a1, b1) = self.h1.central_interval(TAIL_MASS / 2.0);
        (a0.min(a1), b0.max(b1))
    }

    /// `D(P1 || P0)` of the unquantized laws, the limit of the quantized
    /// divergence as the number of levels grows.
    pub fn divergence(&self) -> f64 {
        match (self.h0, self.h1) {
            (
                Density::Gaussian { mean: m0, variance },
                Density::Gaussian { mean: m1, .. },
            ) => (m1 - m0).powi(2) / (2.0 * variance),
            (Density::Exponential { rate: l0 }, Density::Exponential { rate: l1 }) => {
                (l1 / l0).ln() + l0 / l1 - 1.0
            }
            _ => unreachable!("mixed families are rejected on construction"),
        }
    }

    /// Maps a likelihood-ratio threshold to the observation where `L` crosses
    /// it, or `None` when `L` is constant.
    pub(crate) fn observation_at_ratio(&self, t: f64) -> Option<f64> {
        let (slope, intercept) = self.log_ratio_line();
        if slope == 0.0 {
            return None;
        }
        Some((t.ln() - intercept) / slope)
    }

    pub(crate) fn cache_key(&self) -> [u64; 5] {
        let enc = |d: Density| match d {
            Density::Gaussian { mean, variance } => (0u64, mean.to_bits(), variance.to_bits()),
            Density::Exponential { rate } => (1u64, rate.to_bits(), 0),
        };
        let (f, a0, b0) = enc(self.h0);
        let (_, a1, b1) = enc(self.h1);
        [f, a0, b0, a1, b1]
    }
}
