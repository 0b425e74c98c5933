//! Random problem generators shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::Rng;
use transport_core::{Jet, MonomialBasis, ProblemData, ValueShape, VectorFieldJet};

pub fn uniform(rng: &mut StdRng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

/// `S T S^{-1}` with `T` upper triangular carrying `diag` and `S` close to
/// the identity, so the spectrum is `diag` up to round-off.
pub fn with_spectrum(rng: &mut StdRng, diag: &[f64], off: f64) -> DMatrix<f64> {
    let k = diag.len();
    let mut t = DMatrix::from_diagonal(&DVector::from_column_slice(diag));
    for i in 0..k {
        for j in i + 1..k {
            t[(i, j)] = uniform(rng, -off, off);
        }
    }
    let s = DMatrix::identity(k, k) + DMatrix::from_fn(k, k, |_, _| uniform(rng, -0.2, 0.2));
    let si = s.clone().try_inverse().expect("near-identity matrix is invertible");
    s * t * si
}

/// Random jet with coefficients in `[-scale, scale]` on degrees `lo..=hi`.
pub fn random_jet(
    rng: &mut StdRng,
    n: usize,
    order: usize,
    shape: ValueShape,
    lo: usize,
    hi: usize,
    scale: f64,
) -> Jet<f64> {
    let basis = MonomialBasis::get(n, order);
    let bs = shape.len();
    let mut c = vec![0.0; basis.len() * bs];
    for d in lo..=hi.min(order) {
        for k in basis.degree_range(d) {
            for x in &mut c[k * bs..(k + 1) * bs] {
                *x = uniform(rng, -scale, scale);
            }
        }
    }
    Jet::from_coeffs(n, order, shape, c).unwrap()
}

/// Vector field with linearization `b` and random terms of degrees `2..=hi`.
pub fn field_with_linear(
    rng: &mut StdRng,
    b: &DMatrix<f64>,
    order: usize,
    hi: usize,
    scale: f64,
) -> VectorFieldJet<f64> {
    let n = b.nrows();
    let lin = VectorFieldJet::linear(b, order).unwrap().to_vector_jet();
    let extra = random_jet(rng, n, order, ValueShape::Vector(n), 2, hi, scale);
    VectorFieldJet::from_vector_jet(&lin.add(&extra).unwrap()).unwrap()
}

/// Matrix jet with constant term `a0` and random terms of degrees `1..=hi`.
pub fn potential_with_constant(
    rng: &mut StdRng,
    a0: &DMatrix<f64>,
    n: usize,
    order: usize,
    hi: usize,
    scale: f64,
) -> Jet<f64> {
    let m = a0.nrows();
    let c = Jet::constant_matrix(n, order, a0);
    c.add(&random_jet(rng, n, order, ValueShape::Matrix(m), 1, hi, scale))
        .unwrap()
}

/// Problem with given spectra, random nonlinear terms and random `v`.
pub fn problem_with_spectra(
    rng: &mut StdRng,
    mu: &[f64],
    rho: &[f64],
    lambda: f64,
    order: usize,
    scale: f64,
) -> ProblemData<f64> {
    let n = mu.len();
    let m = rho.len();
    let b = with_spectrum(rng, mu, 0.5);
    let a0 = with_spectrum(rng, rho, 0.5);
    let x = field_with_linear(rng, &b, order, order, scale);
    let a = potential_with_constant(rng, &a0, n, order, order, scale);
    let v = random_jet(rng, n, order, ValueShape::Vector(m), 0, order, 1.0);
    ProblemData::new(x, a, v, lambda).unwrap()
}

/// Uniform point in the ball of radius `r`.
pub fn point_in_ball(rng: &mut StdRng, n: usize, r: f64) -> Vec<f64> {
    loop {
        let p: Vec<f64> = (0..n).map(|_| uniform(rng, -r, r)).collect();
        if p.iter().map(|x| x * x).sum::<f64>() <= r * r {
            return p;
        }
    }
}

/// `α·μ` for real `μ`.
pub fn alpha_dot(alpha: &[u32], mu: &[f64]) -> f64 {
    alpha.iter().zip(mu).map(|(&a, m)| a as f64 * m).sum()
}
