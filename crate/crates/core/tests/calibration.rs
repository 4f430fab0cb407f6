mod common;

use latentage_core::calibrate::{valid_roots, Polynomial};
use latentage_core::{
    fit_group_curves, scalar_offset, solve_scalar_for_age, AgeGroupScheme, CalibrationError,
    CalibrationModel, CalibrationSample,
};
use rand::Rng;

fn samples(group: usize, coeffs: &[f64], scalars: &[f64]) -> Vec<CalibrationSample> {
    let p = Polynomial::new(coeffs.to_vec());
    scalars
        .iter()
        .map(|&s| CalibrationSample {
            group,
            scalar_s: s,
            estimated_age: p.eval(s),
        })
        .collect()
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn fit(data: &[CalibrationSample], degree: usize, range: (f64, f64)) -> CalibrationModel {
    fit_group_curves(data, &AgeGroupScheme::nine(), degree, range).unwrap()
}

#[test]
fn planted_cubic_recovered() {
    let truth = [25.0, 1.5, 0.02, -0.001];
    let model = fit(&samples(4, &truth, &grid(-25.0, 25.0, 11)), 3, (-30.0, 30.0));
    let c = model.curve(4).unwrap();
    for (got, want) in c.coeffs.iter().zip(truth) {
        assert!((got - want).abs() < 1e-6, "{:?}", c.coeffs);
    }
    assert!(c.rmse < 1e-9);
    assert_eq!(c.label, "25-35");
}

#[test]
fn planted_line_recovered_at_any_degree() {
    let truth = [30.0, 2.0];
    for degree in 1..=3 {
        let model = fit(&samples(1, &truth, &grid(-10.0, 10.0, 21)), degree, (-20.0, 20.0));
        let c = model.curve(1).unwrap();
        assert!((c.coeffs[0] - 30.0).abs() < 1e-6);
        assert!((c.coeffs[1] - 2.0).abs() < 1e-6);
        assert!(c.coeffs[2..].iter().all(|x| x.abs() < 1e-6));
        assert!((c.linear_aging.slope - 2.0).abs() < 1e-9);
        assert!((c.linear_deaging.intercept - 30.0).abs() < 1e-9);
    }
}

#[test]
fn linear_offset_by_hand() {
    let model = fit(&samples(1, &[30.0, 2.0], &grid(-10.0, 10.0, 21)), 1, (-20.0, 20.0));
    let off = scalar_offset(&model, 1, 30.0, 40.0).unwrap();
    assert!((off.delta_s - 5.0).abs() < 1e-9);
    assert!(!off.fallback_used());
}

#[test]
fn round_trip_on_monotone_truths() {
    let mut r = common::rng(41);
    for case in 0..200 {
        // p'(s) = b + 2 c s + 3 d s^2 stays positive on [-20, 20]
        let b = r.random_range(0.5..3.0);
        let c = r.random_range(-0.005..0.005);
        let d = r.random_range(0.0..0.0008);
        let truth = [r.random_range(10.0..60.0), b, c, d];
        let model = fit(&samples(2, &truth, &grid(-20.0, 20.0, 11)), 3, (-20.0, 20.0));
        let p = Polynomial::new(truth.to_vec());
        for _ in 0..5 {
            let s = r.random_range(-19.0..19.0);
            let target = p.eval(s);
            let sol = solve_scalar_for_age(&model, 2, target).unwrap();
            assert!(!sol.fallback_used, "case {case}");
            assert!((p.eval(sol.scalar) - target).abs() < 0.01, "case {case}");

            let orig = p.eval(r.random_range(-19.0..19.0));
            let off = scalar_offset(&model, 2, orig, target).unwrap();
            let s_orig = solve_scalar_for_age(&model, 2, orig).unwrap().scalar;
            assert!((p.eval(s_orig + off.delta_s) - target).abs() < 0.01, "case {case}");
        }
    }
}

#[test]
fn ambiguous_roots_take_fallback() {
    // 30 + s^3 - 12 s equals 30 at s = 0 and s = +-sqrt(12)
    let truth = [30.0, -12.0, 0.0, 1.0];
    let model = fit(&samples(3, &truth, &grid(-6.0, 6.0, 13)), 3, (-10.0, 10.0));
    let curve = model.curve(3).unwrap();
    let roots = valid_roots(curve, 30.0);
    assert_eq!(roots.len(), 3, "{roots:?}");
    let sol = solve_scalar_for_age(&model, 3, 30.0).unwrap();
    assert!(sol.fallback_used);
    assert_eq!(sol.valid_roots, 3);

    // s^3 - 12 s = 1 also has three roots in range; above p(0) the aging line applies
    assert_eq!(valid_roots(curve, 31.0).len(), 3);
    let sol = solve_scalar_for_age(&model, 3, 31.0).unwrap();
    assert!(sol.fallback_used);
    let line = curve.linear_aging;
    let expected = ((31.0 - line.intercept) / line.slope).clamp(-10.0, 10.0);
    assert_eq!(sol.scalar, expected);

    // unique root: no fallback
    let unique = solve_scalar_for_age(&model, 3, 30.0 + 1000.0 - 120.0).unwrap();
    assert!(!unique.fallback_used);
    assert!((unique.scalar - 10.0).abs() < 1e-6);

    // no root inside the range: fallback, clamped
    let none = solve_scalar_for_age(&model, 3, 5000.0).unwrap();
    assert!(none.fallback_used);
    assert_eq!(none.valid_roots, 0);
    assert_eq!(none.scalar, 10.0);
}

#[test]
fn offset_antisymmetry() {
    let mut r = common::rng(42);
    let model = fit(
        &[
            samples(0, &[8.0, 0.6, 0.01, 0.0002], &grid(-20.0, 20.0, 9)),
            samples(5, &[50.0, 1.2, -0.004, 0.0001], &grid(-20.0, 20.0, 9)),
        ]
        .concat(),
        3,
        (-25.0, 25.0),
    );
    for _ in 0..500 {
        let g = if r.random_bool(0.5) { 0 } else { 5 };
        let a = r.random_range(0.0..90.0);
        let b = r.random_range(0.0..90.0);
        let ab = scalar_offset(&model, g, a, b).unwrap().delta_s;
        let ba = scalar_offset(&model, g, b, a).unwrap().delta_s;
        assert!((ab + ba).abs() <= 1e-9, "{ab} vs {ba}");
        assert_eq!(scalar_offset(&model, g, a, a).unwrap().delta_s, 0.0);
    }
}

#[test]
fn error_paths() {
    let scheme = AgeGroupScheme::four();
    assert!(matches!(
        fit_group_curves(&samples(0, &[1.0, 1.0], &[0.0, 1.0, 2.0]), &scheme, 3, (-5.0, 5.0)),
        Err(CalibrationError::InsufficientPoints { group: 0, distinct: 3, needed: 4 })
    ));
    assert!(matches!(
        fit_group_curves(&[], &scheme, 0, (-5.0, 5.0)),
        Err(CalibrationError::InvalidDegree(0))
    ));
    assert!(matches!(
        fit_group_curves(&[], &scheme, 3, (1.0, 5.0)),
        Err(CalibrationError::InvalidRange(..))
    ));
    assert!(matches!(
        fit_group_curves(&samples(7, &[1.0], &[0.0]), &scheme, 1, (-5.0, 5.0)),
        Err(CalibrationError::InvalidSample(_))
    ));
    let model = fit_group_curves(&samples(0, &[20.0, 0.0], &grid(-5.0, 5.0, 6)), &scheme, 1, (-5.0, 5.0))
        .unwrap();
    assert!(matches!(
        solve_scalar_for_age(&model, 0, 30.0),
        Err(CalibrationError::NoSolution(0))
    ));
    assert!(matches!(
        solve_scalar_for_age(&model, 2, 30.0),
        Err(CalibrationError::GroupMissing(2))
    ));
    assert!(matches!(
        solve_scalar_for_age(&model, 0, f64::NAN),
        Err(CalibrationError::InvalidTarget)
    ));
}

#[test]
fn model_json_round_trip() {
    let model = fit(&samples(4, &[25.0, 1.5, 0.02, -0.001], &grid(-25.0, 25.0, 11)), 3, (-30.0, 30.0));
    let text = serde_json::to_string_pretty(&model).unwrap();
    let back: CalibrationModel = serde_json::from_str(&text).unwrap();
    assert_eq!(back, model);
    back.validate().unwrap();
    for key in ["\"scheme\"", "\"groups\"", "\"label\"", "\"coeffs\"", "\"linear_aging\"", "\"rmse\""] {
        assert!(text.contains(key), "{key}");
    }
}
