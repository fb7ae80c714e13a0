use super::*;
use crate::network::{fixtures, generate_layered, max_flow, Edge, LayeredGraphSpec, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn exp(weight: f64) -> UtilityFunction {
    UtilityFunction::ExponentialDecay { weight }
}

fn opts() -> SolverOptions {
    SolverOptions::default()
}

#[test]
fn linear_utility_reduces_to_max_flow() {
    let net = fixtures::path(5, 3);
    let sol = solve_relaxation(&net, &[UtilityFunction::linear(1.0)], &opts()).unwrap();
    assert_eq!(sol.rates.sensor_rates(), &[3.0]);
    assert_eq!(sol.objective, 3.0);
    assert!(sol.converged);
}

/// Two sensors with cap-4 links into a relay that reaches the fusion center
/// over a cap-4 link.
#[test]
fn exponential_split_matches_line_grid() {
    let net = fixtures::shared_relay(4, 4);
    let utils = [exp(9.0), exp(1.0)];
    let sol = solve_relaxation(&net, &utils, &opts()).unwrap();
    assert!(sol.converged, "gap {}", sol.gap);

    // oracle: r1 + r2 = 4 is tight at the optimum; scan r1 in [0, 4]
    let (mut best_r1, mut best) = (0.0, f64::NEG_INFINITY);
    for i in 0..=4000 {
        let r1 = i as f64 * 1e-3;
        let v = utils[0].value(r1) + utils[1].value(4.0 - r1);
        if v > best {
            best = v;
            best_r1 = r1;
        }
    }
    let r = sol.rates.sensor_rates();
    assert!((r[0] - best_r1).abs() < 1.5e-3, "{r:?} vs {best_r1}");
    assert!((r[0] + r[1] - 4.0).abs() < 1e-9);
    assert!(r[0] > r[1]);
    assert!(sol.objective >= best - 1e-9);
    assert!(sol.objective - best < 1e-5);
}

#[test]
fn constant_utilities_keep_zero_flow() {
    let net = fixtures::shared_relay(2, 3);
    let utils = [UtilityFunction::constant(1.5), UtilityFunction::constant(-2.0)];
    let sol = solve_relaxation(&net, &utils, &opts()).unwrap();
    assert_eq!(sol.objective, -0.5);
    assert!(sol.rates.edge_rates().iter().all(|&r| r == 0.0));
}

#[test]
fn rejects_bad_inputs() {
    let net = fixtures::shared_relay(2, 3);
    let convex = UtilityFunction::PiecewiseLinear(
        PiecewiseLinear::from_integer_table(vec![0.0, 1.0, 3.0]).unwrap(),
    );
    let err = solve_relaxation(&net, &[exp(1.0), convex], &opts()).unwrap_err();
    assert!(matches!(err, crate::Error::NonConcave { sensor: 1, .. }));
    assert!(solve_relaxation(&net, &[exp(1.0)], &opts()).is_err());
    assert!(solve_relaxation(&net, &[exp(1.0), exp(1.0)], &SolverOptions::with_tol(0.0)).is_err());
}

#[test]
fn iteration_cap_returns_best_iterate() {
    let net = fixtures::shared_relay(4, 4);
    let capped = SolverOptions {
        tol: 1e-12,
        max_iterations: 2,
        ..opts()
    };
    let sol = solve_relaxation(&net, &[exp(9.0), exp(1.0)], &capped).unwrap();
    assert!(!sol.converged);
    assert!(sol.iterations <= 2);
    assert!(sol.rates.verify(&net).is_empty());
}

#[test]
fn piecewise_linear_greedy_prefers_steeper_pieces() {
    let net = fixtures::shared_relay(3, 4);
    let a = PiecewiseLinear::from_integer_table(vec![0.0, 5.0, 6.0, 6.5]).unwrap();
    let b = PiecewiseLinear::from_integer_table(vec![0.0, 3.0, 5.5, 7.0]).unwrap();
    let utils = [
        UtilityFunction::PiecewiseLinear(a),
        UtilityFunction::PiecewiseLinear(b),
    ];
    let sol = solve(&net, &utils, &opts()).unwrap();
    // pieces by slope: a0 = 5, b0 = 3, b1 = 2.5, b2 = 1.5, a1 = 1; the shared
    // link is full after four bits
    assert_eq!(sol.real_rates.sensor_rates(), &[1.0, 3.0]);
    assert_eq!(sol.objective_real, 5.0 + 7.0);
    assert_eq!(sol.objective_integral, sol.objective_real);
    assert_eq!(sol.method, Method::SegmentGreedy);
}

#[test]
fn rounding_examples() {
    let net = fixtures::shared_relay(3, 4);
    let integral = max_flow(&net).unwrap();
    let again = round_rates(&net, &integral).unwrap();
    assert_eq!(again.sensor_rates(), integral.sensor_rates());

    let real = crate::network::feasible_rates(&net, &[2.9, 1.1]).unwrap();
    assert!(real.feasible);
    let rounded = round_rates(&net, &real.assignment).unwrap();
    assert_eq!(rounded.sensor_rates(), &[2.0, 1.0]);
    assert!(rounded.is_integral());
    assert!(rounded.verify(&net).is_empty());
}

#[test]
fn total_preserving_rounding_examples() {
    let net = fixtures::shared_relay(3, 4);
    let real = crate::network::feasible_rates(&net, &[2.9, 1.1]).unwrap();
    let rounded = round_rates_with(&net, &real.assignment, Rounding::PreserveTotal).unwrap();
    assert_eq!(rounded.sensor_rates(), &[3.0, 1.0]);

    // the larger fraction cannot grow past its link, so the other sensor does
    let net = fixtures::shared_relay(2, 4);
    let real = crate::network::feasible_rates(&net, &[1.6, 1.5]).unwrap();
    let rounded = round_rates_with(&net, &real.assignment, Rounding::PreserveTotal).unwrap();
    assert_eq!(rounded.sensor_rates(), &[2.0, 1.0]);
    let net = fixtures::shared_relay(2, 3);
    let real = crate::network::feasible_rates(&net, &[1.6, 1.4]).unwrap();
    let rounded = round_rates_with(&net, &real.assignment, Rounding::PreserveTotal).unwrap();
    assert_eq!(rounded.sensor_rates(), &[2.0, 1.0]);
}

#[test]
fn total_preserving_rounding_reaches_floor_of_total() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for seed in 0..40 {
        let net = layered(seed, [6, 5, 4, 3], 2, (1, 6));
        let utilities: Vec<UtilityFunction> = (0..6)
            .map(|_| UtilityFunction::ExponentialDecay { weight: rng.random_range(0.1..10.0) })
            .collect();
        let relaxed = solve_relaxation(&net, &utilities, &opts()).unwrap();
        let rounded = round_rates_with(&net, &relaxed.rates, Rounding::PreserveTotal).unwrap();
        assert!(rounded.is_integral() && rounded.verify(&net).is_empty());
        assert_eq!(rounded.total(), (relaxed.rates.total() + 1e-9).floor(), "seed {seed}");
        for (r, x) in rounded.sensor_rates().iter().zip(relaxed.rates.sensor_rates()) {
            assert!(*r >= (x + 1e-9).floor() && *r <= x.ceil() + 1e-9);
        }
    }
}

#[test]
fn rounding_treats_near_integers_as_integers() {
    let net = fixtures::path(3, 3);
    let real = crate::network::feasible_rates(&net, &[3.0 - 1e-12]).unwrap();
    let rounded = round_rates(&net, &real.assignment).unwrap();
    assert_eq!(rounded.sensor_rates(), &[3.0]);
}

fn layered(seed: u64, sizes: [usize; 4], fanout: usize, caps: (i64, i64)) -> Network {
    generate_layered(&LayeredGraphSpec {
        layer_sizes: sizes,
        fanout,
        capacity_range: caps,
        seed,
    })
    .unwrap()
}

#[test]
fn solutions_satisfy_rate_invariants() {
    for seed in 0..20 {
        let net = layered(seed, [5, 8, 6, 3], 2, (1, 6));
        let utils: Vec<_> = (0..5).map(|k| exp(1.0 + k as f64)).collect();
        let sol = solve(&net, &utils, &opts()).unwrap();
        assert!(sol.converged, "seed {seed}: gap {}", sol.gap);
        assert!(sol.real_rates.verify(&net).is_empty());
        assert!(sol.integral_rates.verify(&net).is_empty());
        assert!(sol.integral_rates.is_integral());
        assert!(sol.objective_integral <= sol.objective_real + 1e-6);
        let floor_total: f64 = sol.real_rates.sensor_rates().iter().map(|r| r.floor()).sum();
        assert!(sol.integral_rates.total() >= floor_total - 1e-9);
    }
}

#[test]
fn more_capacity_never_hurts() {
    for seed in 0..10 {
        let net = layered(seed, [4, 6, 4, 2], 2, (1, 5));
        let utils: Vec<_> = (0..4).map(|k| exp(2.0 + k as f64)).collect();
        let base = solve_relaxation(&net, &utils, &opts()).unwrap().objective;
        for e in 0..net.edges().len() {
            let bigger = net.with_capacity(e, net.edges()[e].capacity + 2);
            let obj = solve_relaxation(&bigger, &utils, &opts()).unwrap().objective;
            assert!(obj >= base - 2e-6, "seed {seed} edge {e}: {obj} < {base}");
        }
    }
}

#[test]
fn scaling_utilities_keeps_the_argmax() {
    let net = layered(7, [4, 6, 4, 2], 2, (1, 5));
    let utils: Vec<_> = [3.0, 1.0, 8.0, 0.5].into_iter().map(exp).collect();
    let scaled: Vec<_> = [3.0, 1.0, 8.0, 0.5].into_iter().map(|w| exp(10.0 * w)).collect();
    let tight = SolverOptions::with_tol(1e-9);
    let a = solve_relaxation(&net, &utils, &tight).unwrap();
    let b = solve_relaxation(&net, &scaled, &tight).unwrap();
    for (x, y) in a.rates.sensor_rates().iter().zip(b.rates.sensor_rates()) {
        assert!((x - y).abs() < 1e-3, "{x} vs {y}");
    }
}

#[test]
fn report_lists_every_sensor() {
    let net = fixtures::shared_relay(4, 4);
    let sol = solve(&net, &[exp(9.0), exp(1.0)], &opts()).unwrap();
    let report = sol.report(&net);
    assert_eq!(report.sensors.len(), 2);
    // (2.79.., 1.20..) floors to (2, 1)
    assert_eq!(report.total_integral, 3.0);
    assert!((report.total_real - 4.0).abs() < 1e-9);
    let json = serde_json::to_value(&report).unwrap();
    assert_eq!(json["method"], "frank_wolfe");
    assert_eq!(json["sensors"][1]["sensor"], 1);
}

#[test]
fn sensors_routing_through_sensors() {
    let net = Network::new(
        vec![0, 1, 2],
        vec![Edge { u: 1, v: 0, capacity: 2 }, Edge { u: 0, v: 2, capacity: 3 }],
        vec![0, 1],
        2,
    )
    .unwrap();
    let sol = solve(&net, &[exp(1.0), exp(4.0)], &opts()).unwrap();
    assert!(sol.real_rates.verify(&net).is_empty());
    assert!((sol.real_rates.total() - 3.0).abs() < 1e-9);
}

fn table(values: &[f64]) -> UtilityFunction {
    UtilityFunction::PiecewiseLinear(PiecewiseLinear::from_integer_table(values.to_vec()).unwrap())
}

#[test]
fn demand_inverts_the_slope() {
    let u = exp(3.0);
    for price in [0.01, 0.5, 2.0] {
        assert!((u.supergradient(u.demand(price)) - price).abs() < 1e-12);
    }
    assert_eq!(u.demand(10.0), 0.0);
    let pl = table(&[0.0, 1.0, 1.5, 1.6]);
    assert_eq!(pl.demand(0.5), 2.0);
    assert_eq!(pl.demand(0.2), 2.0);
    assert_eq!(pl.demand(0.01), 3.0);
    assert_eq!(UtilityFunction::linear(1.0).demand(0.5), f64::INFINITY);
}

#[test]
fn mixed_utilities_match_line_grid() {
    let net = fixtures::shared_relay(4, 5);
    let utils = [table(&[0.0, 1.0, 1.5, 1.6, 1.65]), exp(2.0)];
    let sol = solve_relaxation(&net, &utils, &opts()).unwrap();
    assert_eq!(sol.method, Method::Decomposition);
    assert!(sol.converged);

    // both utilities increase, so r0 + r1 = 5 with each rate in [1, 4]
    let best = (0..=30_000)
        .map(|i| {
            let r0 = 1.0 + i as f64 * 1e-4;
            utils[0].value(r0) + utils[1].value(5.0 - r0)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(sol.objective >= best - 1e-9, "{} vs {best}", sol.objective);
    assert!(sol.objective - best < 1e-6);
}

#[test]
fn mixed_utilities_stay_feasible_and_beat_max_flow() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for seed in 0..40 {
        let net = layered(seed, [5, 8, 6, 3], 2, (1, 6));
        let utils: Vec<UtilityFunction> = (0..net.num_sensors())
            .map(|k| {
                if k % 2 == 0 {
                    exp(rng.random_range(0.1..5.0))
                } else {
                    let mut v = vec![0.0];
                    let mut s = rng.random_range(0.1..2.0);
                    for _ in 0..8 {
                        v.push(v.last().unwrap() + s);
                        s *= rng.random_range(0.2..1.0);
                    }
                    table(&v)
                }
            })
            .collect();
        let sol = solve_relaxation(&net, &utils, &opts()).unwrap();
        assert_eq!(sol.method, Method::Decomposition);
        assert!(sol.rates.verify(&net).is_empty());
        let flow = max_flow(&net).unwrap();
        assert!(sol.objective >= objective(&utils, flow.sensor_rates()) - 1e-9);
        assert!(sol.rates.total() <= flow.total() + 1e-9);
    }
}
