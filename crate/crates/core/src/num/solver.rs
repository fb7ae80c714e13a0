//! Concave utility maximization over the flow polytope.
//!
//! The set of sensor-rate vectors a network can carry at once is a
//! polymatroid: for every sensor subset the total is bounded by the min cut
//! separating it from the fusion center. Two consequences drive this module.
//!
//! * A linear objective with nonnegative weights is maximized by filling
//!   sensors greedily in decreasing weight order, each time augmenting to a
//!   max flow. That is the linear oracle of the Frank-Wolfe loop.
//! * A separable piecewise-linear concave objective is maximized exactly by
//!   the same greedy applied to the linear pieces of all utilities, sorted by
//!   slope. Frank-Wolfe cannot certify optimality at kinks, so this case is
//!   solved directly.
//! * When kinked utilities are mixed with smooth ones, the problem is split
//!   along tight cuts until a single-budget allocation is routable.

use serde::{Deserialize, Serialize};

use super::decompose::decompose;
use super::utility::UtilityFunction;
use crate::error::{Error, Result};
use crate::network::{feasible_rates, FlowSolver, Network, RateAssignment};

/// Stopping rules for [`solve_relaxation`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Target Frank-Wolfe duality gap on the objective.
    pub tol: f64,
    pub max_iterations: usize,
    /// How [`solve`] turns the relaxation into integral rates.
    pub rounding: Rounding,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-6,
            max_iterations: 10_000,
            rounding: Rounding::Floor,
        }
    }
}

/// Rounding of real-valued sensor rates to integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    /// Floor every sensor rate; may lose up to one bit per sensor.
    #[default]
    Floor,
    /// Floor, then raise sensors by one bit, largest fractional part first,
    /// while the result stays routable, until the total reaches
    /// `floor(sum of real rates)`.
    PreserveTotal,
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions {
            tol,
            ..Self::default()
        }
    }
}

/// Which algorithm produced a relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Exact greedy over the linear pieces of piecewise-linear utilities.
    SegmentGreedy,
    /// Away-step Frank-Wolfe with a greedy max-weight-flow oracle.
    FrankWolfe,
    /// Budget-and-split decomposition, used when kinked and smooth utilities
    /// are mixed.
    Decomposition,
}

/// Real-valued optimum of the relaxed problem.
#[derive(Debug, Clone)]
pub struct Relaxation {
    pub rates: RateAssignment,
    pub objective: f64,
    /// Final Frank-Wolfe gap, an upper bound on the distance to the optimum
    /// for smooth utilities. Zero for the exact greedy.
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub method: Method,
}

/// Relaxed and rounded allocations for one problem instance.
#[derive(Debug, Clone)]
pub struct NumSolution {
    pub real_rates: RateAssignment,
    pub integral_rates: RateAssignment,
    pub objective_real: f64,
    pub objective_integral: f64,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub method: Method,
}

/// Sum of the utilities at the given sensor rates.
pub fn objective(utilities: &[UtilityFunction], sensor_rates: &[f64]) -> f64 {
    utilities
        .iter()
        .zip(sensor_rates)
        .map(|(u, &r)| u.value(r))
        .sum()
}

fn check_inputs(net: &Network, utilities: &[UtilityFunction], opts: &SolverOptions) -> Result<()> {
    net.ensure_valid()?;
    if utilities.len() != net.num_sensors() {
        return Err(Error::InvalidInput(format!(
            "{} utilities for {} sensors",
            utilities.len(),
            net.num_sensors()
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance {} must be positive", opts.tol)));
    }
    for (u, &s) in utilities.iter().zip(net.sensors()) {
        u.check()
            .map_err(|detail| Error::NonConcave { sensor: s, detail })?;
    }
    Ok(())
}

/// Maximizes the sum of sensor utilities over real-valued rates that respect
/// capacities, antisymmetry, relay conservation and nonnegative sensor rates.
///
/// Hitting the iteration cap is not an error: the best iterate is returned
/// with `converged == false`.
pub fn solve_relaxation(
    net: &Network,
    utilities: &[UtilityFunction],
    opts: &SolverOptions,
) -> Result<Relaxation> {
    check_inputs(net, utilities, opts)?;
    let bounds: Vec<f64> = net
        .sensors()
        .iter()
        .map(|&s| net.incident_capacity(s) as f64)
        .collect();
    let segments: Option<Vec<_>> = utilities
        .iter()
        .zip(&bounds)
        .map(|(u, &b)| u.segments(b))
        .collect();
    match segments {
        Some(segments) => Ok(segment_greedy(net, utilities, &segments)),
        None if utilities.iter().any(UtilityFunction::has_kink) => {
            let rates = decompose(net, utilities).assignment(net);
            Ok(Relaxation {
                objective: objective(utilities, rates.sensor_rates()),
                rates,
                gap: 0.0,
                iterations: 0,
                converged: true,
                method: Method::Decomposition,
            })
        }
        None => Ok(FrankWolfe::new(net, utilities, &bounds).run(opts)),
    }
}

fn segment_greedy(
    net: &Network,
    utilities: &[UtilityFunction],
    segments: &[Vec<super::utility::Segment>],
) -> Relaxation {
    let mut pieces: Vec<(usize, f64, f64)> = segments
        .iter()
        .enumerate()
        .flat_map(|(k, segs)| segs.iter().map(move |s| (k, s.slope, s.width)))
        .filter(|&(_, slope, width)| slope > 0.0 && width > 0.0)
        .collect();
    // stable: equal slopes keep sensor order, then piece order
    pieces.sort_by(|a, b| b.1.total_cmp(&a.1));

    let mut solver = FlowSolver::new(net);
    for &(k, _, width) in &pieces {
        let cap = solver.source_capacity(k) + width;
        solver.set_source_capacity(k, cap);
        solver.augment();
    }
    let rates = solver.assignment(net);
    Relaxation {
        objective: objective(utilities, rates.sensor_rates()),
        rates,
        gap: 0.0,
        iterations: pieces.len(),
        converged: true,
        method: Method::SegmentGreedy,
    }
}

#[derive(Debug, Clone)]
struct Vertex {
    sensor_rates: Vec<f64>,
    edge_rates: Vec<f64>,
    weight: f64,
}

struct FrankWolfe<'a> {
    net: &'a Network,
    utilities: &'a [UtilityFunction],
    bounds: &'a [f64],
    template: FlowSolver,
}

impl<'a> FrankWolfe<'a> {
    fn new(net: &'a Network, utilities: &'a [UtilityFunction], bounds: &'a [f64]) -> Self {
        FrankWolfe {
            net,
            utilities,
            bounds,
            template: FlowSolver::new(net),
        }
    }

    /// Vertex of the flow polytope maximizing `weights . r`.
    fn linear_oracle(&self, weights: &[f64]) -> Vertex {
        let mut order: Vec<usize> = (0..weights.len()).filter(|&k| weights[k] > 0.0).collect();
        order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]));
        let mut solver = self.template.clone();
        for k in order {
            solver.set_source_capacity(k, self.bounds[k]);
            solver.augment();
        }
        Vertex {
            sensor_rates: (0..weights.len()).map(|k| solver.sensor_flow(k)).collect(),
            edge_rates: solver.edge_rates(),
            weight: 0.0,
        }
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.utilities
            .iter()
            .zip(x)
            .map(|(u, &r)| u.supergradient(r))
            .collect()
    }

    /// Maximizes the concave restriction `t -> f(x + t d)` on `[0, t_max]` by
    /// bisection on the sign of its derivative.
    fn line_search(&self, x: &[f64], d: &[f64], t_max: f64) -> f64 {
        let slope = |t: f64| -> f64 {
            self.utilities
                .iter()
                .zip(x.iter().zip(d))
                .map(|(u, (&xi, &di))| {
                    if di == 0.0 {
                        0.0
                    } else {
                        u.supergradient(xi + t * di) * di
                    }
                })
                .sum()
        };
        if slope(t_max) >= 0.0 {
            return t_max;
        }
        if slope(0.0) <= 0.0 {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0, t_max);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if slope(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    fn run(&self, opts: &SolverOptions) -> Relaxation {
        let n = self.utilities.len();
        let mut active = vec![Vertex {
            sensor_rates: vec![0.0; n],
            edge_rates: vec![0.0; self.net.edges().len()],
            weight: 1.0,
        }];
        let mut x = vec![0.0; n];
        let mut gap = f64::INFINITY;
        let mut iterations = 0;
        let mut converged = false;

        while iterations < opts.max_iterations {
            let w = self.gradient(&x);
            let s = self.linear_oracle(&w);
            let dot = |v: &[f64]| -> f64 { w.iter().zip(v).map(|(a, b)| a * b).sum() };
            let wx = dot(&x);
            gap = dot(&s.sensor_rates) - wx;
            if gap <= opts.tol {
                converged = true;
                break;
            }
            iterations += 1;

            let (away, away_score) = active
                .iter()
                .enumerate()
                .map(|(i, v)| (i, dot(&v.sensor_rates)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("active set is never empty");
            let away_gap = wx - away_score;

            if gap >= away_gap || active[away].weight >= 1.0 {
                let d: Vec<f64> = s.sensor_rates.iter().zip(&x).map(|(a, b)| a - b).collect();
                let t = self.line_search(&x, &d, 1.0);
                if t == 0.0 {
                    // the oracle direction does not improve f; numerically done
                    break;
                }
                for v in &mut active {
                    v.weight *= 1.0 - t;
                }
                match active.iter().position(|v| v.sensor_rates == s.sensor_rates) {
                    Some(i) => active[i].weight += t,
                    None => active.push(Vertex { weight: t, ..s }),
                }
            } else {
                let a_weight = active[away].weight;
                let t_max = a_weight / (1.0 - a_weight);
                let d: Vec<f64> = x
                    .iter()
                    .zip(&active[away].sensor_rates)
                    .map(|(a, b)| a - b)
                    .collect();
                let t = self.line_search(&x, &d, t_max);
                if t == 0.0 {
                    break;
                }
                for v in &mut active {
                    v.weight *= 1.0 + t;
                }
                if t >= t_max {
                    active.remove(away);
                } else {
                    active[away].weight -= t;
                }
            }
            active.retain(|v| v.weight > 0.0);
            let total: f64 = active.iter().map(|v| v.weight).sum();
            for v in &mut active {
                v.weight /= total;
            }
            x = combine(&active, |v| &v.sensor_rates, n);

            #[cfg(debug_assertions)]
            {
                let edges = self.edge_iterate(&active);
                let ra = RateAssignment::from_edge_rates(self.net, edges);
                let bad = ra.verify(self.net);
                debug_assert!(bad.is_empty(), "infeasible iterate: {bad:?}");
            }
        }

        let rates = RateAssignment::from_edge_rates(self.net, self.edge_iterate(&active));
        Relaxation {
            objective: objective(self.utilities, rates.sensor_rates()),
            rates,
            gap,
            iterations,
            converged,
            method: Method::FrankWolfe,
        }
    }

    /// Convex combination of the active vertex flows, clamped onto the
    /// capacity box to absorb rounding in the weights.
    fn edge_iterate(&self, active: &[Vertex]) -> Vec<f64> {
        let mut edges = combine(active, |v| &v.edge_rates, self.net.edges().len());
        for (r, e) in edges.iter_mut().zip(self.net.edges()) {
            let c = e.capacity as f64;
            *r = r.clamp(-c, c);
        }
        edges
    }
}

fn combine(active: &[Vertex], field: impl Fn(&Vertex) -> &Vec<f64>, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for v in active {
        for (o, &r) in out.iter_mut().zip(field(v)) {
            *o += v.weight * r;
        }
    }
    out
}

/// Floors each sensor rate and re-derives an integral flow carrying exactly
/// the floored demands.
///
/// Flooring only lowers demands and the network is integral, so a witness
/// always exists. Sensor rates within `1e-9` below an integer are treated as
/// that integer.
pub fn round_rates(net: &Network, real: &RateAssignment) -> Result<RateAssignment> {
    let demands: Vec<f64> = real
        .sensor_rates()
        .iter()
        .map(|&r| (r + 1e-9).floor().max(0.0))
        .collect();
    let check = feasible_rates(net, &demands)?;
    if !check.feasible {
        return Err(Error::InvalidInput(
            "floored demands are not routable; the input assignment is infeasible".into(),
        ));
    }
    Ok(check.assignment)
}

/// Rounds with the chosen rule. See [`Rounding`].
///
/// For [`Rounding::PreserveTotal`] the integral vectors between the floors
/// and the ceilings of `real` that the network can carry form a polymatroid
/// containing `real`, so every maximal one, in particular the greedy result,
/// has total at least `floor(sum real)`.
pub fn round_rates_with(
    net: &Network,
    real: &RateAssignment,
    rounding: Rounding,
) -> Result<RateAssignment> {
    let floored = round_rates(net, real)?;
    if rounding == Rounding::Floor {
        return Ok(floored);
    }
    let target = (real.total() + 1e-9).floor();
    let mut demands: Vec<f64> = floored.sensor_rates().to_vec();
    let mut order: Vec<usize> = (0..demands.len()).collect();
    let frac: Vec<f64> = real
        .sensor_rates()
        .iter()
        .zip(&demands)
        .map(|(r, d)| r - d)
        .collect();
    order.sort_by(|&a, &b| frac[b].total_cmp(&frac[a]).then(a.cmp(&b)));
    let mut total: f64 = demands.iter().sum();
    let mut witness = floored;
    for k in order {
        if total >= target {
            break;
        }
        if frac[k] <= 1e-9 {
            continue;
        }
        demands[k] += 1.0;
        let check = feasible_rates(net, &demands)?;
        if check.feasible {
            total += 1.0;
            witness = check.assignment;
        } else {
            demands[k] -= 1.0;
        }
    }
    Ok(witness)
}

/// Solves the relaxation, then rounds it.
pub fn solve(
    net: &Network,
    utilities: &[UtilityFunction],
    opts: &SolverOptions,
) -> Result<NumSolution> {
    let relaxed = solve_relaxation(net, utilities, opts)?;
    let integral = round_rates_with(net, &relaxed.rates, opts.rounding)?;
    Ok(NumSolution {
        objective_integral: objective(utilities, integral.sensor_rates()),
        integral_rates: integral,
        real_rates: relaxed.rates,
        objective_real: relaxed.objective,
        gap: relaxed.gap,
        iterations: relaxed.iterations,
        converged: relaxed.converged,
        method: relaxed.method,
    })
}
