use serde::{Deserialize, Serialize};

/// Slope increase tolerated before a utility is rejected as non-concave.
pub const CONCAVITY_TOL: f64 = 1e-9;

/// A nondecreasing concave utility of a sensor's rate in bits.
///
/// Rates below zero are evaluated at zero; the solvers never produce them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UtilityFunction {
    /// `offset + slope * min(r, domain_max)`.
    Linear {
        slope: f64,
        #[serde(default)]
        offset: f64,
        #[serde(default)]
        domain_max: Option<f64>,
    },
    /// `-weight * 4^(-r)`: the quantization-noise share of a mean squared
    /// error when each extra bit halves the quantizer step.
    ExponentialDecay { weight: f64 },
    /// Linear interpolation through tabulated points, constant past the last.
    PiecewiseLinear(PiecewiseLinear),
}

/// Breakpoints `(rates[k], values[k])` with `rates[0] == 0` and strictly
/// increasing rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    rates: Vec<f64>,
    values: Vec<f64>,
}

/// One linear piece of a piecewise-linear utility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Segment {
    pub width: f64,
    pub slope: f64,
}

impl PiecewiseLinear {
    pub fn new(rates: Vec<f64>, values: Vec<f64>) -> Result<Self, String> {
        if rates.is_empty() || rates.len() != values.len() {
            return Err(format!(
                "need matching nonempty breakpoints, got {} rates and {} values",
                rates.len(),
                values.len()
            ));
        }
        if rates[0] != 0.0 {
            return Err(format!("first breakpoint must be at rate 0, got {}", rates[0]));
        }
        if rates.windows(2).any(|w| !(w[1] > w[0])) {
            return Err("breakpoint rates must be strictly increasing".into());
        }
        if rates.iter().chain(&values).any(|x| !x.is_finite()) {
            return Err("breakpoints must be finite".into());
        }
        Ok(PiecewiseLinear { rates, values })
    }

    /// Interpolates `values[r]` at the integer rates `0, 1, ..`.
    pub fn from_integer_table(values: Vec<f64>) -> Result<Self, String> {
        let rates = (0..values.len()).map(|r| r as f64).collect();
        Self::new(rates, values)
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn slopes(&self) -> impl Iterator<Item = f64> + '_ {
        self.rates
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(r, v)| (v[1] - v[0]) / (r[1] - r[0]))
    }

    fn value(&self, r: f64) -> f64 {
        let k = self.rates.partition_point(|&x| x <= r);
        if k == 0 {
            return self.values[0];
        }
        if k == self.rates.len() {
            return *self.values.last().unwrap();
        }
        let (r0, r1) = (self.rates[k - 1], self.rates[k]);
        let (v0, v1) = (self.values[k - 1], self.values[k]);
        v0 + (v1 - v0) * (r - r0) / (r1 - r0)
    }

    fn right_slope(&self, r: f64) -> f64 {
        let k = self.rates.partition_point(|&x| x <= r);
        if k == 0 || k == self.rates.len() {
            return 0.0;
        }
        (self.values[k] - self.values[k - 1]) / (self.rates[k] - self.rates[k - 1])
    }
}

impl UtilityFunction {
    pub fn linear(slope: f64) -> Self {
        UtilityFunction::Linear {
            slope,
            offset: 0.0,
            domain_max: None,
        }
    }

    pub fn constant(value: f64) -> Self {
        UtilityFunction::Linear {
            slope: 0.0,
            offset: value,
            domain_max: None,
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        let r = r.max(0.0);
        match self {
            UtilityFunction::Linear {
                slope,
                offset,
                domain_max,
            } => offset + slope * domain_max.map_or(r, |m| r.min(m)),
            UtilityFunction::ExponentialDecay { weight } => -weight * 4f64.powf(-r),
            UtilityFunction::PiecewiseLinear(pl) => pl.value(r),
        }
    }

    /// Right derivative at `r`; a supergradient of a concave function.
    pub fn supergradient(&self, r: f64) -> f64 {
        let r = r.max(0.0);
        match self {
            UtilityFunction::Linear {
                slope, domain_max, ..
            } => match domain_max {
                Some(m) if r >= *m => 0.0,
                _ => *slope,
            },
            UtilityFunction::ExponentialDecay { weight } => {
                weight * std::f64::consts::LN_2 * 2.0 * 4f64.powf(-r)
            }
            UtilityFunction::PiecewiseLinear(pl) => pl.right_slope(r),
        }
    }

    /// Rate past which the utility is constant, if any.
    pub fn domain_max(&self) -> Option<f64> {
        match self {
            UtilityFunction::Linear { domain_max, .. } => *domain_max,
            UtilityFunction::ExponentialDecay { .. } => None,
            UtilityFunction::PiecewiseLinear(pl) => pl.rates.last().copied(),
        }
    }

    /// Largest rate maximizing `u(r) - price * r` for `price > 0`; infinite
    /// for an unbounded linear utility whose slope reaches the price.
    pub(crate) fn demand(&self, price: f64) -> f64 {
        match self {
            UtilityFunction::Linear {
                slope, domain_max, ..
            } => {
                if *slope >= price {
                    domain_max.unwrap_or(f64::INFINITY)
                } else {
                    0.0
                }
            }
            UtilityFunction::ExponentialDecay { weight } => {
                let top = weight * std::f64::consts::LN_2 * 2.0;
                if top <= price {
                    0.0
                } else {
                    (top / price).ln() / (2.0 * std::f64::consts::LN_2)
                }
            }
            UtilityFunction::PiecewiseLinear(pl) => {
                let k = pl.slopes().take_while(|&s| s >= price).count();
                pl.rates[k]
            }
        }
    }

    /// Whether the utility has a point where its slope jumps.
    pub(crate) fn has_kink(&self) -> bool {
        match self {
            UtilityFunction::Linear { slope, domain_max, .. } => *slope != 0.0 && domain_max.is_some(),
            UtilityFunction::ExponentialDecay { .. } => false,
            UtilityFunction::PiecewiseLinear(_) => true,
        }
    }

    /// Linear pieces from rate 0, for utilities that have them. The final
    /// piece of an unbounded linear utility is cut at `rate_bound`.
    pub(crate) fn segments(&self, rate_bound: f64) -> Option<Vec<Segment>> {
        match self {
            UtilityFunction::Linear {
                slope, domain_max, ..
            } => Some(vec![Segment {
                width: domain_max.map_or(rate_bound, |m| m.min(rate_bound)),
                slope: *slope,
            }]),
            UtilityFunction::ExponentialDecay { .. } => None,
            UtilityFunction::PiecewiseLinear(pl) => Some(
                pl.rates
                    .windows(2)
                    .zip(pl.slopes())
                    .map(|(r, slope)| Segment {
                        width: r[1] - r[0],
                        slope,
                    })
                    .collect(),
            ),
        }
    }

    /// Rejects utilities that decrease or whose slope increases by more than
    /// [`CONCAVITY_TOL`]. Piecewise-linear utilities are checked exactly,
    /// every kind is also checked on a grid of rates.
    pub fn check(&self) -> Result<(), String> {
        match self {
            UtilityFunction::Linear {
                slope,
                offset,
                domain_max,
            } => {
                if !(slope.is_finite() && offset.is_finite()) {
                    return Err("non-finite coefficients".into());
                }
                if domain_max.is_some_and(|m| !(m >= 0.0)) {
                    return Err("domain_max must be nonnegative".into());
                }
            }
            UtilityFunction::ExponentialDecay { weight } => {
                if !(weight.is_finite() && *weight >= 0.0) {
                    return Err(format!("weight {weight} must be finite and nonnegative"));
                }
            }
            UtilityFunction::PiecewiseLinear(pl) => {
                let mut prev = f64::INFINITY;
                for (k, s) in pl.slopes().enumerate() {
                    if s > prev + CONCAVITY_TOL {
                        return Err(format!(
                            "slope rises from {prev} to {s} at breakpoint {}",
                            pl.rates[k]
                        ));
                    }
                    prev = s;
                }
            }
        }
        let top = self.domain_max().unwrap_or(64.0).max(1.0);
        let grid: Vec<f64> = (0..=256).map(|i| top * i as f64 / 256.0).collect();
        let mut prev = f64::INFINITY;
        for &r in &grid {
            let g = self.supergradient(r);
            if g < -CONCAVITY_TOL {
                return Err(format!("decreasing at rate {r} (slope {g})"));
            }
            if g > prev + CONCAVITY_TOL {
                return Err(format!("slope rises to {g} at rate {r}"));
            }
            prev = g;
        }
        Ok(())
    }
}

/// Smallest concave function through or above the points, which must have
/// strictly increasing abscissae. Returns the hull vertices and whether any
/// input point lies strictly below the hull.
pub fn upper_concave_envelope(points: &[(f64, f64)]) -> (Vec<(f64, f64)>, bool) {
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for &p in points {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // drop b when it lies on or below the chord a-p
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let changed = points.iter().any(|&(x, y)| {
        let k = hull.partition_point(|h| h.0 < x);
        if k < hull.len() && hull[k].0 == x {
            return hull[k].1 > y + 1e-12 * y.abs().max(1.0);
        }
        let (a, b) = (hull[k - 1], hull[k]);
        let on_hull = a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0);
        on_hull > y + 1e-12 * y.abs().max(1.0)
    });
    (hull, changed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn piecewise_evaluation_and_right_slopes() {
        let u = UtilityFunction::PiecewiseLinear(
            PiecewiseLinear::from_integer_table(vec![0.0, 2.0, 3.0]).unwrap(),
        );
        assert_eq!(u.value(0.5), 1.0);
        assert_eq!(u.value(1.5), 2.5);
        assert_eq!(u.supergradient(1.0), 1.0);
        assert_eq!(u.supergradient(0.0), 2.0);
        assert_eq!(u.value(7.0), 3.0);
        assert_eq!(u.supergradient(2.0), 0.0);
        assert_eq!(u.domain_max(), Some(2.0));
        assert!(u.check().is_ok());
    }

    #[test]
    fn rejects_convex_table() {
        let u = UtilityFunction::PiecewiseLinear(
            PiecewiseLinear::from_integer_table(vec![0.0, 1.0, 3.0]).unwrap(),
        );
        assert!(u.check().unwrap_err().contains("slope rises"));
        let decreasing = UtilityFunction::linear(-1.0);
        assert!(decreasing.check().is_err());
        assert!(UtilityFunction::ExponentialDecay { weight: -1.0 }.check().is_err());
    }

    #[test]
    fn malformed_breakpoints() {
        assert!(PiecewiseLinear::new(vec![1.0], vec![0.0]).is_err());
        assert!(PiecewiseLinear::new(vec![0.0, 0.0], vec![0.0, 1.0]).is_err());
        assert!(PiecewiseLinear::new(vec![0.0, 1.0], vec![0.0]).is_err());
    }

    #[test]
    fn exponential_decay_derivative() {
        let u = UtilityFunction::ExponentialDecay { weight: 9.0 };
        let h = 1e-6;
        for r in [0.0, 0.7, 3.0] {
            let fd = (u.value(r + h) - u.value(r)) / h;
            assert!((fd - u.supergradient(r)).abs() < 1e-4);
        }
        assert!(u.check().is_ok());
    }

    #[test]
    fn linear_with_domain_cap() {
        let u = UtilityFunction::Linear {
            slope: 2.0,
            offset: 1.0,
            domain_max: Some(3.0),
        };
        assert_eq!(u.value(5.0), 7.0);
        assert_eq!(u.supergradient(3.0), 0.0);
        assert_eq!(u.segments(10.0).unwrap()[0].width, 3.0);
    }

    #[test]
    fn envelope_examples() {
        let concave = [(0.0, 0.0), (1.0, 2.0), (2.0, 3.0)];
        let (hull, changed) = upper_concave_envelope(&concave);
        assert_eq!(hull, concave.to_vec());
        assert!(!changed);

        let dip = [(0.0, 0.0), (1.0, 0.5), (2.0, 3.0), (3.0, 3.5)];
        let (hull, changed) = upper_concave_envelope(&dip);
        assert_eq!(hull, vec![(0.0, 0.0), (2.0, 3.0), (3.0, 3.5)]);
        assert!(changed);

        // collinear middle point is dropped without counting as a change
        let line = [(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)];
        let (hull, changed) = upper_concave_envelope(&line);
        assert_eq!(hull.len(), 2);
        assert!(!changed);
    }

    proptest! {
        #[test]
        fn envelope_dominates_and_is_concave(ys in proptest::collection::vec(-5.0f64..5.0, 1..12)) {
            let pts: Vec<_> = ys.iter().enumerate().map(|(i, &y)| (i as f64, y)).collect();
            let (hull, _) = upper_concave_envelope(&pts);
            let pl = PiecewiseLinear::new(
                hull.iter().map(|p| p.0).collect(),
                hull.iter().map(|p| p.1).collect(),
            ).unwrap();
            for &(x, y) in &pts {
                prop_assert!(pl.value(x) >= y - 1e-12);
            }
            let slopes: Vec<f64> = pl.slopes().collect();
            for w in slopes.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
        }
    }
}
