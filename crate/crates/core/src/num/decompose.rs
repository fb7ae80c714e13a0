//! Exact maximization of separable concave utilities over the polymatroid of
//! routable sensor rates.
//!
//! Write `g(S)` for the largest total rate the sensors in `S` can send at
//! once. A subproblem is a set `D` of free sensors and a set `C` of sensors
//! already saturated, with rank `h(B) = g(B + C) - g(C)` on subsets of `D`.
//! Maximizing under the single budget `x(D) = h(D)` gives a point `x`. If
//! some `B` has `x(B) > h(B)`, a most violated `B` is tight at an optimum,
//! and the problem splits into `(B, C)` and `(D - B, C + B)`. Otherwise `x`
//! is optimal for the subproblem.

use super::utility::UtilityFunction;
use crate::network::{FlowSolver, Network};

/// Slack below which a cut counts as satisfied.
const CUT_TOL: f64 = 1e-9;
const BISECTION_STEPS: usize = 2000;

pub(crate) fn decompose(net: &Network, utilities: &[UtilityFunction]) -> FlowSolver {
    let n = utilities.len();
    let unbounded = net.total_capacity() as f64 + 1.0;
    let template = FlowSolver::new(net);
    let rank = |members: &[usize]| -> f64 {
        let mut solver = template.clone();
        for &k in members {
            solver.set_source_capacity(k, unbounded);
        }
        solver.augment()
    };

    let mut rates = vec![0.0; n];
    let mut stack: Vec<(Vec<usize>, Vec<usize>)> = vec![((0..n).collect(), Vec::new())];
    while let Some((free, saturated)) = stack.pop() {
        if free.is_empty() {
            continue;
        }
        let base = rank(&saturated);
        let all: Vec<usize> = free.iter().chain(&saturated).copied().collect();
        let budget = (rank(&all) - base).max(0.0);
        let x = allocate(&free.iter().map(|&k| &utilities[k]).collect::<Vec<_>>(), budget);

        let mut solver = template.clone();
        for &k in &saturated {
            solver.set_source_capacity(k, unbounded);
        }
        for (&k, &xk) in free.iter().zip(&x) {
            solver.set_source_capacity(k, xk);
        }
        let carried = solver.augment();
        let total: f64 = x.iter().sum();
        // min over B of h(B) - x(B) equals carried - x(D) - g(C)
        let violation = base + total - carried;
        let side = solver.source_side_sensors();
        let (tight, rest): (Vec<usize>, Vec<usize>) = free.iter().partition(|&&k| side[k]);
        if violation <= CUT_TOL * (1.0 + total) || tight.is_empty() || rest.is_empty() {
            for (&k, &xk) in free.iter().zip(&x) {
                rates[k] = xk;
            }
            continue;
        }
        let mut inner = saturated.clone();
        inner.extend(&tight);
        stack.push((rest, inner));
        stack.push((tight, saturated));
    }

    let mut solver = template;
    for (k, &r) in rates.iter().enumerate() {
        solver.set_source_capacity(k, r);
    }
    solver.augment();
    solver
}

/// Maximizes the sum of `utilities` subject to rates summing to `budget`.
fn allocate(utilities: &[&UtilityFunction], budget: f64) -> Vec<f64> {
    let n = utilities.len();
    if budget <= 0.0 {
        return vec![0.0; n];
    }
    let demand = |price: f64| -> Vec<f64> { utilities.iter().map(|u| u.demand(price)).collect() };
    let total = |d: &[f64]| d.iter().sum::<f64>();

    // demand(hi) < budget <= demand(lo); price 0 stands for unbounded demand
    let mut lo = 0.0;
    let mut hi = utilities
        .iter()
        .map(|u| u.supergradient(0.0))
        .fold(0.0, f64::max)
        * 2.0
        + 1.0;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(&demand(mid)) >= budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = demand(hi);
    let upper = if lo > 0.0 { demand(lo) } else { vec![f64::INFINITY; n] };
    let leftover = budget - total(&x);
    let room: Vec<f64> = upper.iter().zip(&x).map(|(u, x)| u - x).collect();
    let open = room.iter().filter(|r| r.is_infinite()).count();
    if open > 0 {
        for (xi, r) in x.iter_mut().zip(&room) {
            if r.is_infinite() {
                *xi += leftover / open as f64;
            }
        }
    } else {
        let spare: f64 = room.iter().sum();
        if spare > 0.0 {
            for (xi, r) in x.iter_mut().zip(&room) {
                *xi += leftover * (r / spare).min(1.0);
            }
        }
    }
    x
}
