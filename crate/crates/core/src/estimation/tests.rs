use nalgebra::DMatrix;
use proptest::prelude::*;

use super::*;

fn range() -> QuantizerRange {
    QuantizerRange::new(-5.0, 5.0).unwrap()
}

fn reference_model(alpha: f64, seed: u64) -> SensingModel {
    let a = make_sensing_matrix(10, 3, 4, alpha, seed).unwrap();
    SensingModel::new(a, 0.1, range()).unwrap()
}

#[test]
fn pseudoinverse_examples() {
    let eye = DMatrix::<f64>::identity(3, 3);
    let p = pseudoinverse(&eye).unwrap();
    assert!((p - &eye).abs().max() < 1e-12);

    let col = DMatrix::from_row_slice(2, 1, &[2.0, 0.0]);
    let p = pseudoinverse(&col).unwrap();
    assert!((p[(0, 0)] - 0.5).abs() < 1e-12);
    assert!(p[(0, 1)].abs() < 1e-12);

    let a = make_sensing_matrix(10, 3, 4, 0.3, 5).unwrap();
    let p = pseudoinverse(&a).unwrap();
    assert!((p * a - DMatrix::<f64>::identity(3, 3)).abs().max() < 1e-8);
}

#[test]
fn rank_deficient_matrix_is_rejected() {
    let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
    assert!(matches!(pseudoinverse(&a), Err(Error::SingularModel { .. })));
    let wide = DMatrix::<f64>::zeros(2, 3);
    assert!(pseudoinverse(&wide).is_err());
}

#[test]
fn zero_alpha_rows_still_leave_a_full_rank_model() {
    let a = make_sensing_matrix(10, 3, 4, 0.0, 1).unwrap();
    assert!(a.rows(0, 4).iter().all(|&x| x == 0.0));
    let model = SensingModel::new(a, 0.1, range()).unwrap();
    // zero rows carry no information, so their pinv columns vanish
    assert!(model.column_weights()[..4].iter().all(|&w| w < 1e-20));
}

#[test]
fn sensing_matrix_scaling_and_determinism() {
    let base = make_sensing_matrix(10, 3, 4, 1.0, 9).unwrap();
    assert!(base.iter().all(|&x| (0.0..1.0).contains(&x)));
    let scaled = make_sensing_matrix(10, 3, 4, 0.3, 9).unwrap();
    assert!((scaled.rows(0, 4) - base.rows(0, 4) * 0.3).abs().max() < 1e-15);
    assert_eq!(scaled.rows(4, 6), base.rows(4, 6));
    assert_eq!(make_sensing_matrix(10, 3, 4, 0.3, 9).unwrap(), scaled);
    assert!(make_sensing_matrix(3, 3, 4, 1.0, 0).is_err());
}

#[test]
fn noise_variance_of_uniform() {
    let model = reference_model(1.0, 1);
    assert!((model.noise_variance() - 1.0 / 300.0).abs() < 1e-15);
}

#[test]
fn utility_at_zero_rate() {
    // unit pinv column norm, range width 10
    let model = SensingModel::new(DMatrix::identity(1, 1), 0.0, range()).unwrap();
    let g = &model.utilities()[0];
    assert!((g.value(0.0) + 100.0 / 12.0).abs() < 1e-12);
    assert!(g.value(40.0).abs() < 1e-20);
}

#[test]
fn utility_scales_with_column_norm() {
    let one = SensingModel::new(DMatrix::identity(1, 1), 0.0, range()).unwrap();
    // pinv of [0.5] is [2], so the squared column norm is 4
    let half = SensingModel::new(DMatrix::from_element(1, 1, 0.5), 0.0, range()).unwrap();
    for r in [0.0, 1.5, 3.0] {
        assert!((half.utilities()[0].value(r) - 4.0 * one.utilities()[0].value(r)).abs() < 1e-12);
    }
}

#[test]
fn predict_mse_examples() {
    let model = SensingModel::new(DMatrix::identity(1, 1), 0.0, range()).unwrap();
    assert!((model.predict_mse(&[1]) - 25.0 / 12.0).abs() < 1e-12);
    assert!((model.predict_mse(&[0]) - 100.0 / 12.0).abs() < 1e-12);

    let model = reference_model(1.0, 2);
    let floor = model.noise_floor();
    assert!((model.predict_mse(&[60; 10]) - floor).abs() < 1e-15);
}

#[test]
fn utilities_and_mse_agree() {
    let model = reference_model(0.3, 4);
    let utils = model.utilities();
    for rates in [[0u32; 10], [3; 10], [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]] {
        let sum: f64 = utils.iter().zip(&rates).map(|(g, &r)| g.value(r as f64)).sum();
        assert!((model.noise_floor() - sum - model.predict_mse(&rates)).abs() < 1e-10);
    }
}

#[test]
fn predict_mse_strictly_decreasing_in_each_rate() {
    let model = reference_model(0.3, 4);
    let base = [3u32; 10];
    for i in 0..10 {
        let mut more = base;
        more[i] += 1;
        assert!(model.predict_mse(&more) < model.predict_mse(&base));
    }
}

#[test]
fn quantize_examples() {
    assert_eq!(quantize(0.3, 1, range()).value, 2.5);
    assert_eq!(quantize(-0.3, 1, range()).value, -2.5);
    assert_eq!(quantize(4.2, 0, range()).value, 0.0);
    assert_eq!(quantize(6.0, 1, range()).value, 2.5);
    assert_eq!(quantize(-9.0, 2, range()).value, -3.75);
    assert_eq!(quantize(5.0, 2, range()).value, 3.75);
    assert_eq!(quantize(0.0, 1, range()).step, 5.0);
}

#[test]
fn estimate_examples() {
    let model = SensingModel::new(DMatrix::identity(3, 3), 0.0, range()).unwrap();
    let x = model.estimate(&[1.0, 2.0, 3.0]);
    assert!(x.iter().zip([1.0, 2.0, 3.0]).all(|(a, b)| (a - b).abs() < 1e-12));

    let model = reference_model(0.3, 8);
    let truth = [0.4, -1.2, 0.7];
    let d: Vec<f64> = model
        .matrix()
        .row_iter()
        .map(|row| row.iter().zip(&truth).map(|(a, b)| a * b).sum())
        .collect();
    let x = model.estimate(&d);
    assert!(x.iter().zip(truth).all(|(a, b)| (a - b).abs() < 1e-8));
    assert!(model.estimate(&[0.0; 10]).iter().all(|&v| v == 0.0));
}

#[test]
fn monte_carlo_with_ample_bits_hits_the_noise_floor() {
    let model = reference_model(1.0, 3);
    let est = monte_carlo_mse(&model, &[40; 10], 20_000, 7);
    let floor = model.noise_floor();
    assert!((est.mse - floor).abs() < 3.0 * est.stderr.unwrap(), "{est:?} vs {floor}");
}

#[test]
fn monte_carlo_is_deterministic() {
    let model = reference_model(1.0, 3);
    let a = monte_carlo_mse(&model, &[4; 10], 500, 11);
    let b = monte_carlo_mse(&model, &[4; 10], 500, 11);
    assert_eq!(a, b);
    assert_ne!(a, monte_carlo_mse(&model, &[4; 10], 500, 12));
    let short = monte_carlo_mse(&model, &[4; 10], 1, 11);
    assert!(short.stderr.is_none());
}

#[test]
fn monte_carlo_stderr_shrinks_like_inverse_sqrt() {
    let model = reference_model(1.0, 3);
    let small = monte_carlo_mse(&model, &[3; 10], 2_500, 1).stderr.unwrap();
    let large = monte_carlo_mse(&model, &[3; 10], 40_000, 1).stderr.unwrap();
    let ratio = small / large;
    assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
}

proptest! {
    #[test]
    fn quantization_error_within_half_step(y in -5.0f64..=5.0, bits in 0u32..30) {
        let q = quantize(y, bits, range());
        prop_assert!((q.value - y).abs() <= q.step / 2.0 + 1e-12);
    }

    #[test]
    fn quantized_values_are_cell_midpoints(y in -20.0f64..20.0, bits in 0u32..12) {
        let q = quantize(y, bits, range());
        let k = (q.value - range().lo) / q.step - 0.5;
        prop_assert!((k - k.round()).abs() < 1e-9);
        prop_assert!(k.round() >= 0.0 && k.round() < 2f64.powi(bits as i32));
    }
}
