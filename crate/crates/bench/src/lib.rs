//! Fixed problems shared by the benchmarks.

use nalgebra::DMatrix;
use transport_core::{Jet, MultiIndex, ProblemData, ValueShape, VectorFieldJet};

fn vector_jet(n: usize, order: usize, terms: &[(&[u32], &[f64])]) -> Jet<f64> {
    Jet::from_terms(
        n,
        order,
        ValueShape::Vector(terms[0].1.len()),
        terms.iter().map(|(a, c)| (MultiIndex::new(a.to_vec()), c.to_vec())),
    )
    .expect("valid fixture")
}

/// `X = grad(½y₁² + y₁²y₂ + y₂²)`, `A = 0`, `λ = 2`: a resonant problem with
/// a one-dimensional kernel.
pub fn gradient_problem(order: usize) -> ProblemData<f64> {
    let x = vector_jet(
        2,
        order,
        &[
            (&[1, 0], &[1.0, 0.0]),
            (&[0, 1], &[0.0, 2.0]),
            (&[2, 0], &[0.0, 1.0]),
            (&[1, 1], &[2.0, 0.0]),
        ],
    );
    ProblemData::new(
        VectorFieldJet::from_vector_jet(&x).expect("vector field"),
        Jet::zeros(2, order, ValueShape::Matrix(1)),
        Jet::zeros(2, order, ValueShape::Vector(1)),
        2.0,
    )
    .expect("valid fixture")
}

/// Non-resonant two-dimensional system with a focus-type linear part,
/// quadratic terms and a rank-2 bundle.
pub fn focus_problem(order: usize) -> ProblemData<f64> {
    let x = vector_jet(
        2,
        order,
        &[
            (&[1, 0], &[1.0, 0.8]),
            (&[0, 1], &[-0.8, 1.0]),
            (&[2, 0], &[0.3, -0.1]),
            (&[1, 1], &[0.0, 0.4]),
            (&[0, 2], &[-0.2, 0.0]),
        ],
    );
    let a0 = DMatrix::from_row_slice(2, 2, &[0.6, 0.2, -0.1, 0.9]);
    let a = Jet::constant_matrix(2, order, &a0)
        .add(&Jet::from_terms(
            2,
            order,
            ValueShape::Matrix(2),
            [(MultiIndex::new(vec![1, 0]), vec![0.1, 0.0, 0.2, -0.1])],
        )
        .expect("valid fixture"))
        .expect("same shape");
    let v = vector_jet(2, order, &[(&[0, 0], &[1.0, 0.5]), (&[0, 1], &[0.0, 1.0]), (&[1, 1], &[0.3, 0.0])]);
    ProblemData::new(
        VectorFieldJet::from_vector_jet(&x).expect("vector field"),
        a,
        v,
        0.0,
    )
    .expect("valid fixture")
}

/// Non-normal 3×3 matrix for the growth-constant search.
pub fn jordan_like() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 3.0, 0.0, 0.0, 1.5])
}
