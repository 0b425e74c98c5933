//! Operator matrix, spectral and Taylor-solver properties on random problems.

mod common;

use common::*;
use nalgebra::DVector;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use transport_core::codec::{problem_from_json, problem_to_json};
use transport_core::linalg;
use transport_core::spectral::{
    dual_kernel_basis, endo_spectrum, enumerate_spectrum, kernel_basis, linearization_spectrum,
    solvability_test,
};
use transport_core::{assemble, residual, solve_to_order, Jet, MonomialBasis, ProblemData, SolverConfig, ValueShape};

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn integer_problem(seed: u64, order: usize) -> (ProblemData<f64>, Vec<f64>, Vec<f64>) {
    let mut rng = StdRng::seed_from_u64(seed);
    let n = rng.gen_range(1..=3);
    let m = rng.gen_range(1..=2);
    let mu: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=3) as f64).collect();
    let rho: Vec<f64> = (0..m).map(|_| rng.gen_range(-2..=1) as f64).collect();
    let p = problem_with_spectra(&mut rng, &mu, &rho, 0.0, order, 0.5);
    (p, mu, rho)
}

#[test]
fn diagonal_of_operator_is_the_spectrum() {
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..20 {
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(1..=2);
        let order = rng.gen_range(1..=4);
        let mu: Vec<f64> = (0..n).map(|_| uniform(&mut rng, 0.5, 2.0)).collect();
        let rho: Vec<f64> = (0..m).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        // Diagonal linear parts make the matrix triangular in the monomial basis.
        let b = nalgebra::DMatrix::from_diagonal(&DVector::from_vec(mu.clone()));
        let a0 = nalgebra::DMatrix::from_diagonal(&DVector::from_vec(rho.clone()));
        let x = field_with_linear(&mut rng, &b, order, order, 0.5);
        let a = potential_with_constant(&mut rng, &a0, n, order, order, 0.5);
        let p = ProblemData::new(x, a, Jet::zeros(n, order, ValueShape::Vector(m)), 0.0).unwrap();
        let op = assemble(&p);
        let basis = MonomialBasis::get(n, order);
        for (k, alpha) in basis.monomials().iter().enumerate() {
            for j in 0..m {
                let want = alpha_dot(alpha.entries(), &mu) + rho[j];
                let got = op.entries()[(k * m + j, k * m + j)];
                assert!((got - want).abs() < 1e-13, "{got} vs {want}");
            }
        }
        assert!(op.is_block_lower_triangular());
    }
}

#[test]
fn operator_eigenvalues_match_enumeration() {
    let mut rng = StdRng::seed_from_u64(12);
    for _ in 0..20 {
        let n = rng.gen_range(1..=2);
        let m = rng.gen_range(1..=2);
        let order = rng.gen_range(1..=3);
        let mu: Vec<f64> = (0..n).map(|_| uniform(&mut rng, 0.5, 2.0)).collect();
        let rho: Vec<f64> = (0..m).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        let p = problem_with_spectra(&mut rng, &mu, &rho, 0.0, order, 0.5);
        let ev = linalg::eigenvalues(assemble(&p).entries()).unwrap();
        let mut got: Vec<f64> = ev.iter().map(|z| z.re).collect();
        let mut want: Vec<f64> = MonomialBasis::get(n, order)
            .monomials()
            .iter()
            .flat_map(|a| rho.iter().map(move |r| (a.clone(), r)))
            .map(|(a, r)| alpha_dot(a.entries(), &mu) + r)
            .collect();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-6, "{got:?} vs {want:?}");
        }
    }
}

#[test]
fn enumerated_spectrum_counts_representations() {
    // μ = (1, 2), ρ = 0: λ = 2 from (2,0) and (0,1); λ = 4 from (4,0), (2,1), (0,2).
    let e = enumerate_spectrum(&[c(1.0), c(2.0)], &[c(0.0)], 4.0, 1e-9).unwrap();
    let mult = |l: f64| e.iter().find(|r| (r.lambda.re - l).abs() < 1e-9).map_or(0, |r| r.multiplicity());
    assert_eq!(mult(0.0), 1);
    assert_eq!(mult(2.0), 2);
    assert_eq!(mult(3.0), 2);
    assert_eq!(mult(4.0), 3);
}

#[test]
fn dual_kernel_annihilates_the_image() {
    let cfg = SolverConfig::default();
    for seed in 0..30 {
        let (p, mu, rho) = integer_problem(seed, 3);
        let lambda = mu[0] + rho[0];
        let p = p.with_lambda(lambda);
        let dual = dual_kernel_basis(&p, &cfg).unwrap();
        let ker = kernel_basis(&p, &cfg).unwrap();
        assert_eq!(dual.dim(), ker.dim());
        assert!(ker.dim() >= 1);
        let order = dual.basis[0].order();
        let po = p.with_order(order).unwrap();
        let op = assemble(&po);
        let mut rng = StdRng::seed_from_u64(seed + 100);
        let u = random_jet(&mut rng, p.n(), order, ValueShape::Vector(p.m()), 0, order, 1.0);
        let lu = op.shifted(lambda) * DVector::from_column_slice(u.coeffs());
        let lu = Jet::from_coeffs(p.n(), order, ValueShape::Vector(p.m()), lu.as_slice().to_vec()).unwrap();
        for t in &dual.basis {
            assert!(t.pair(&lu).unwrap().abs() < 1e-10);
        }
        for w in &ker.basis {
            let r = op.shifted(lambda) * DVector::from_column_slice(w.to_order(order).coeffs());
            assert!(r.amax() < 1e-10);
        }
    }
}

#[test]
fn solvable_image_is_recovered_up_to_kernel() {
    let cfg = SolverConfig::default();
    for seed in 0..30 {
        let (p, mu, rho) = integer_problem(seed, 4);
        let lambda = mu[mu.len() - 1] + rho[0];
        let order = 4;
        let p = p.with_lambda(lambda);
        let mut rng = StdRng::seed_from_u64(seed + 7);
        let u_true = random_jet(&mut rng, p.n(), order, ValueShape::Vector(p.m()), 0, order, 1.0);
        let v = residual(&p.with_v(Jet::zeros(p.n(), order, ValueShape::Vector(p.m()))).unwrap(), &u_true).unwrap();
        let q = p.with_v(v).unwrap();
        assert!(solvability_test(&q, &cfg).unwrap().solvable);
        let sol = solve_to_order(&q, order, &cfg).unwrap();
        let u = sol.particular.expect("solvable");
        assert!(residual(&q, &u).unwrap().max_abs() < 1e-9);
        // u - u_true lies in the kernel
        let d = u.sub(&u_true.to_order(u.order())).unwrap();
        let zero_v = q.with_v(Jet::zeros(p.n(), order, ValueShape::Vector(p.m()))).unwrap();
        assert!(residual(&zero_v, &d).unwrap().max_abs() < 1e-9);
    }
}

#[test]
fn complex_field_agrees_with_real_field() {
    let mut rng = StdRng::seed_from_u64(21);
    let cfg = SolverConfig::default();
    // Focus: linearization with eigenvalues 1 ± 2i.
    let b = nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 2.0, 1.0]);
    let x = field_with_linear(&mut rng, &b, 4, 3, 0.3);
    let a = potential_with_constant(&mut rng, &nalgebra::DMatrix::from_element(1, 1, 0.4), 2, 4, 2, 0.3);
    let v = random_jet(&mut rng, 2, 4, ValueShape::Vector(1), 0, 4, 1.0);
    let p = ProblemData::new(x, a, v, 0.0).unwrap();
    let mu = linearization_spectrum(p.x()).unwrap();
    assert!(mu.iter().all(|z| (z.re - 1.0).abs() < 1e-12 && (z.im.abs() - 2.0).abs() < 1e-12));
    assert_eq!(endo_spectrum(&p.a0()).unwrap(), vec![c(0.4)]);
    let ur = solve_to_order(&p, 4, &cfg).unwrap().particular.unwrap();
    let uc = solve_to_order(&p.to_complex(), 4, &cfg).unwrap().particular.unwrap();
    let back = uc.try_to_real(1e-12).expect("real data gives a real solution");
    assert!(back.sub(&ur).unwrap().max_abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn non_resonant_solutions_have_zero_residual(seed in any::<u64>(), order in 1usize..=5) {
        let mut rng = StdRng::seed_from_u64(seed);
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(1..=2);
        let mu: Vec<f64> = (0..n).map(|_| uniform(&mut rng, 0.5, 2.0)).collect();
        let rho: Vec<f64> = (0..m).map(|_| uniform(&mut rng, 0.1, 1.0)).collect();
        // λ < 0 < every α·μ + ρ_j
        let p = problem_with_spectra(&mut rng, &mu, &rho, -0.5, order, 0.5);
        let sol = solve_to_order(&p, order, &SolverConfig::default()).unwrap();
        prop_assert!(sol.resonance.is_none());
        prop_assert!(sol.kernel.is_empty());
        let u = sol.particular.unwrap();
        prop_assert!(residual(&p, &u).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn kernel_and_dual_kernel_have_equal_dimension(seed in any::<u64>()) {
        let (p, mu, rho) = integer_problem(seed, 3);
        let mut rng = StdRng::seed_from_u64(seed ^ 0x5a5a);
        let alpha: Vec<u32> = (0..mu.len()).map(|_| rng.gen_range(0..=2)).collect();
        let lambda = alpha_dot(&alpha, &mu) + rho[rng.gen_range(0..rho.len())];
        let p = p.with_lambda(lambda);
        let cfg = SolverConfig::default();
        let k = kernel_basis(&p, &cfg).unwrap().dim();
        let d = dual_kernel_basis(&p, &cfg).unwrap().dim();
        prop_assert_eq!(k, d);
        prop_assert!(k >= 1);
    }

    #[test]
    fn problem_json_round_trip(seed in any::<u64>(), order in 1usize..=4) {
        let mut rng = StdRng::seed_from_u64(seed);
        let lambda = uniform(&mut rng, -1.0, 1.0);
        let p = problem_with_spectra(&mut rng, &[1.0, 1.5], &[0.3], lambda, order, 0.5);
        let json = problem_to_json(&p);
        let text = serde_json::to_string(&json).unwrap();
        let back: ProblemData<f64> =
            problem_from_json(&serde_json::from_str(&text).unwrap(), "problem").unwrap();
        prop_assert_eq!(back.x().to_vector_jet(), p.x().to_vector_jet());
        prop_assert_eq!(back.a(), p.a());
        prop_assert_eq!(back.v(), p.v());
        prop_assert_eq!(back.lambda(), p.lambda());
    }
}
