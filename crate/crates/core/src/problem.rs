//! Problem data for `(D_X + A − λ)u = v`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::jet::{Jet, ValueShape, VectorFieldJet};
use crate::scalar::Scalar;

/// Everything defining `(D_X + A − λ)u = v` near a zero of `X`, with all jets
/// at one working order `N`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemData<T> {
    x: VectorFieldJet<T>,
    a: Jet<T>,
    v: Jet<T>,
    lambda: T,
}

impl<T: Scalar> ProblemData<T> {
    pub fn new(x: VectorFieldJet<T>, a: Jet<T>, v: Jet<T>, lambda: T) -> Result<Self> {
        let n = x.n();
        let order = x.order();
        let m = match a.shape() {
            ValueShape::Matrix(m) => m,
            other => {
                return Err(Error::ShapeMismatch(format!(
                    "A must be a matrix jet, found {other}"
                )))
            }
        };
        if v.shape() != ValueShape::Vector(m) {
            return Err(Error::ShapeMismatch(format!(
                "v must be vector:{m} to match A, found {}",
                v.shape()
            )));
        }
        for (name, j) in [("A", &a), ("v", &v)] {
            if j.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: j.n(),
                    context: "number of variables of A or v",
                });
            }
            if j.order() != order {
                return Err(Error::ShapeMismatch(format!(
                    "{name} has order {}, X has order {order}",
                    j.order()
                )));
            }
        }
        Ok(ProblemData { x, a, v, lambda })
    }

    /// Builds a problem after bringing every jet to `order`. Raising the order
    /// pads with zeros, i.e. the inputs are read as polynomials.
    pub fn at_order(
        x: &VectorFieldJet<T>,
        a: &Jet<T>,
        v: &Jet<T>,
        lambda: T,
        order: usize,
    ) -> Result<Self> {
        if order == 0 {
            return Err(Error::OrderBudget("working order must be at least 1".into()));
        }
        ProblemData::new(x.to_order(order)?, a.to_order(order), v.to_order(order), lambda)
    }

    pub fn n(&self) -> usize {
        self.x.n()
    }

    /// Dimension of the value space `V`.
    pub fn m(&self) -> usize {
        match self.a.shape() {
            ValueShape::Matrix(m) => m,
            _ => unreachable!("validated in new"),
        }
    }

    pub fn order(&self) -> usize {
        self.x.order()
    }

    pub fn x(&self) -> &VectorFieldJet<T> {
        &self.x
    }

    pub fn a(&self) -> &Jet<T> {
        &self.a
    }

    pub fn v(&self) -> &Jet<T> {
        &self.v
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    /// `A(0)`.
    pub fn a0(&self) -> DMatrix<T> {
        self.a.constant_term_matrix().expect("A is a matrix jet")
    }

    pub fn with_order(&self, order: usize) -> Result<Self> {
        ProblemData::at_order(&self.x, &self.a, &self.v, self.lambda, order)
    }

    pub fn with_lambda(&self, lambda: T) -> Self {
        ProblemData {
            lambda,
            ..self.clone()
        }
    }

    pub fn with_v(&self, v: Jet<T>) -> Result<Self> {
        ProblemData::new(self.x.clone(), self.a.clone(), v, self.lambda)
    }

    /// The same problem with `A` replaced by `A − λ·id` and `λ = 0`.
    pub fn absorb_lambda(&self) -> Self {
        let m = self.m();
        let shift = Jet::constant_matrix(
            self.n(),
            self.order(),
            &DMatrix::from_diagonal_element(m, m, self.lambda),
        );
        ProblemData {
            a: self.a.sub(&shift).expect("same shape"),
            lambda: T::zero(),
            ..self.clone()
        }
    }

    pub fn to_complex(&self) -> ProblemData<Complex64> {
        let comps = self.x.components().iter().map(|c| c.to_complex()).collect();
        ProblemData {
            x: VectorFieldJet::new(comps).expect("promotion keeps the field valid"),
            a: self.a.to_complex(),
            v: self.v.to_complex(),
            lambda: self.lambda.to_complex(),
        }
    }
}

impl ProblemData<Complex64> {
    /// Equivalent real problem on `ℝ^{2m}` (real and imaginary parts stacked),
    /// available when `X` is real.
    pub fn realify(&self) -> Result<ProblemData<f64>> {
        let tol = 0.0;
        let comps = self
            .x
            .components()
            .iter()
            .map(|c| {
                c.try_to_real(tol).ok_or_else(|| {
                    Error::Field("the vector field must be real for flow integration".into())
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let x = VectorFieldJet::new(comps)?;
        let m = self.m();
        let a = self.absorb_lambda().a;
        let len = a.basis().len();
        let mut ra = Vec::with_capacity(len * 4 * m * m);
        let mut rv = Vec::with_capacity(len * 2 * m);
        for k in 0..len {
            let blk = a.block(k);
            for r in 0..2 * m {
                for c in 0..2 * m {
                    let z = blk[(r % m) * m + (c % m)];
                    let val = match (r < m, c < m) {
                        (true, true) | (false, false) => z.re,
                        (true, false) => -z.im,
                        (false, true) => z.im,
                    };
                    ra.push(val);
                }
            }
            let vb = self.v.block(k);
            rv.extend(vb.iter().map(|z| z.re));
            rv.extend(vb.iter().map(|z| z.im));
        }
        let n = self.n();
        let order = self.order();
        ProblemData::new(
            x,
            Jet::from_coeffs(n, order, ValueShape::Matrix(2 * m), ra)?,
            Jet::from_coeffs(n, order, ValueShape::Vector(2 * m), rv)?,
            0.0,
        )
    }
}
