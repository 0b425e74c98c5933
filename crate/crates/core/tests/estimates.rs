//! Growth constants and the perturbation bounds on random matrices.

mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use transport_core::estimates::{perturbation_bound, VIOLATION_SLACK};
use transport_core::linalg;
use transport_core::ode::StepConfig;
use transport_core::{compute_m, ell, two_regime_bound, Error, MatrixPath};

fn random_a0(rng: &mut StdRng) -> DMatrix<f64> {
    let k = rng.gen_range(2..=3);
    let diag: Vec<f64> = (0..k).map(|_| uniform(rng, -1.0, 2.0)).collect();
    with_spectrum(rng, &diag, 1.5)
}

/// Brute-force `sup_{s ≥ 0} ‖exp(−s(A₀ − ℓ + ε))‖` on a fine grid.
fn m_by_grid(a0: &DMatrix<f64>, eps: f64) -> f64 {
    let k = a0.nrows();
    let shifted = a0 - DMatrix::identity(k, k) * (ell(a0).unwrap() - eps);
    (0..=20_000)
        .map(|i| i as f64 * 40.0 / eps / 20_000.0)
        .map(|s| linalg::spectral_norm(&linalg::expm(&(-&shifted * s))))
        .fold(1.0, f64::max)
}

#[test]
fn constant_path_transition_is_the_exponential() {
    let mut rng = StdRng::seed_from_u64(31);
    let a0 = random_a0(&mut rng);
    let path = MatrixPath::constant(a0.clone(), 4.0);
    let times = [0.0, -0.5, -1.7, -4.0];
    let cfg = StepConfig {
        rel_tol: 1e-12,
        abs_tol: 1e-14,
        ..StepConfig::default()
    };
    let es = path.transition(&times, &cfg).unwrap();
    for (t, e) in times.iter().zip(es) {
        let want = linalg::expm(&(&a0 * *t));
        assert!((e - &want).amax() <= 1e-9 * want.amax(), "t = {t}");
    }
}

#[test]
fn growth_constant_matches_grid_search() {
    let mut rng = StdRng::seed_from_u64(32);
    for _ in 0..10 {
        let a0 = random_a0(&mut rng);
        let eps = uniform(&mut rng, 0.1, 1.0);
        let m = compute_m(&a0, eps).unwrap();
        let g = m_by_grid(&a0, eps);
        assert!(m >= g * (1.0 - 1e-6), "M = {m}, grid = {g}");
        assert!(m <= g * (1.0 + 1e-3), "M = {m}, grid = {g}");
    }
}

#[test]
fn hypothesis_violation_is_reported() {
    let a0 = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
    let b = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 5.0, 0.0]);
    let a0c = a0.clone();
    let path = MatrixPath::new(move |_| &a0c + &b, 5.0);
    match two_regime_bound(&a0, &path, 0.5, 0.0, 10) {
        Err(Error::HypothesisViolated { deviation, limit, .. }) => assert!(deviation > limit),
        other => panic!("expected a hypothesis violation, got {other:?}"),
    }
}

#[test]
fn positive_t0_is_rejected() {
    let a0 = DMatrix::identity(2, 2);
    let path = MatrixPath::constant(a0.clone(), 1.0);
    assert!(matches!(two_regime_bound(&a0, &path, 0.5, 0.1, 10), Err(Error::InvalidInput(_))));
}

#[test]
fn report_serializes() {
    let a0 = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 2.0]);
    let path = MatrixPath::constant(a0.clone(), 3.0);
    let r = two_regime_bound(&a0, &path, 0.3, 0.0, 5).unwrap();
    let csv = r.to_csv();
    assert_eq!(csv.lines().next(), Some("t,norm_E,bound"));
    assert_eq!(csv.lines().count(), 6);
    let j = r.to_json();
    assert_eq!(j["samples"].as_array().unwrap().len(), 5);
    assert_eq!(j["violated"], false);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn growth_constant_is_at_least_one(seed in any::<u64>(), eps in 0.05..1.5f64) {
        let mut rng = StdRng::seed_from_u64(seed);
        prop_assert!(compute_m(&random_a0(&mut rng), eps).unwrap() >= 1.0);
    }

    #[test]
    fn growth_constant_is_shift_and_rotation_invariant(
        seed in any::<u64>(),
        eps in 0.1..1.0f64,
        shift in -3.0..3.0f64,
        angle in 0.0..6.3f64,
    ) {
        let mut rng = StdRng::seed_from_u64(seed);
        let diag = [uniform(&mut rng, -1.0, 1.0), uniform(&mut rng, -1.0, 1.0)];
        let a0 = with_spectrum(&mut rng, &diag, 1.0);
        let m = compute_m(&a0, eps).unwrap();
        let shifted = &a0 + DMatrix::identity(2, 2) * shift;
        prop_assert!((compute_m(&shifted, eps).unwrap() - m).abs() <= 1e-6 * m);
        let (s, c) = angle.sin_cos();
        let r = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let rotated = &r * &a0 * r.transpose();
        prop_assert!((compute_m(&rotated, eps).unwrap() - m).abs() <= 1e-6 * m);
        prop_assert!((ell(&shifted).unwrap() - ell(&a0).unwrap() - shift).abs() < 1e-9);
    }

    #[test]
    fn single_regime_bound_holds(seed in any::<u64>(), eps in 0.1..1.0f64, size in 0.0..1.0f64) {
        let mut rng = StdRng::seed_from_u64(seed);
        let a0 = random_a0(&mut rng);
        let k = a0.nrows();
        let b = DMatrix::from_fn(k, k, |_, _| rng.gen_range(-1.0..1.0)) * size;
        let freq = uniform(&mut rng, 0.5, 3.0);
        let a0c = a0.clone();
        let path = MatrixPath::new(move |t| &a0c + &b * (freq * t).cos(), 6.0);
        let bound = perturbation_bound(&a0, &path, eps).unwrap();
        let times: Vec<f64> = (0..=40).map(|i| -6.0 * i as f64 / 40.0).collect();
        let cfg = StepConfig { rel_tol: 1e-11, abs_tol: 1e-300, ..StepConfig::default() };
        let es = path.transition(&times, &cfg).unwrap();
        for (t, e) in times.iter().zip(&es) {
            let norm = linalg::spectral_norm(e);
            prop_assert!(norm <= bound.eval(*t) * (1.0 + VIOLATION_SLACK), "t = {}: {} > {}", t, norm, bound.eval(*t));
        }
    }
}
