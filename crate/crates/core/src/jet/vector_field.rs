use nalgebra::DMatrix;

use super::{Jet, MultiIndex, ValueShape};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Jet of a vector field `X = Σ X^i ∂/∂y_i` vanishing at the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorFieldJet<T> {
    components: Vec<Jet<T>>,
    linearization: DMatrix<T>,
}

impl<T: Scalar> VectorFieldJet<T> {
    /// Builds the field from its scalar components. Rejects a nonzero
    /// constant term and orders below one.
    pub fn new(components: Vec<Jet<T>>) -> Result<Self> {
        let n = components.len();
        if n == 0 {
            return Err(Error::InvalidInput("vector field without components".into()));
        }
        let order = components[0].order();
        if order == 0 {
            return Err(Error::OrderBudget(
                "a vector field jet needs order at least 1".into(),
            ));
        }
        for (i, c) in components.iter().enumerate() {
            if c.shape() != ValueShape::Scalar {
                return Err(Error::ShapeMismatch(format!(
                    "component {i} of the vector field is {}",
                    c.shape()
                )));
            }
            if c.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: c.n(),
                    context: "vector field component variables",
                });
            }
            if c.order() != order {
                return Err(Error::ShapeMismatch(format!(
                    "component {i} has order {}, expected {order}",
                    c.order()
                )));
            }
            if !c.coeffs()[0].is_zero() {
                return Err(Error::InvalidInput(format!(
                    "component {} of the vector field does not vanish at the source",
                    i + 1
                )));
            }
        }
        let linearization = DMatrix::from_fn(n, n, |i, j| components[i].coeffs()[1 + j]);
        Ok(VectorFieldJet {
            components,
            linearization,
        })
    }

    /// Interprets a `vector:n` jet in `n` variables as a vector field.
    pub fn from_vector_jet(x: &Jet<T>) -> Result<Self> {
        match x.shape() {
            ValueShape::Vector(m) if m == x.n() => {}
            other => {
                return Err(Error::ShapeMismatch(format!(
                    "a vector field in {} variables must be vector:{}, found {other}",
                    x.n(),
                    x.n()
                )))
            }
        }
        let comps = (0..x.n()).map(|i| x.component(i)).collect::<Result<_>>()?;
        VectorFieldJet::new(comps)
    }

    /// Euler (radial) field `Σ y_i ∂_i`.
    pub fn euler(n: usize, order: usize) -> Self {
        let comps = (0..n).map(|i| Jet::coordinate(n, order, i)).collect();
        VectorFieldJet::new(comps).expect("the Euler field is well formed")
    }

    /// Linear field `X^i = Σ_j B_ij y_j`.
    pub fn linear(b: &DMatrix<T>, order: usize) -> Result<Self> {
        let n = b.nrows();
        if b.ncols() != n {
            return Err(Error::ShapeMismatch("linear field matrix must be square".into()));
        }
        let comps = (0..n)
            .map(|i| {
                let terms = (0..n).map(|j| (MultiIndex::unit(n, j), vec![b[(i, j)]]));
                Jet::from_terms(n, order, ValueShape::Scalar, terms)
            })
            .collect::<Result<_>>()?;
        VectorFieldJet::new(comps)
    }

    /// Euclidean gradient field of a scalar potential, `X^i = ∂φ/∂y_i`,
    /// at order `N(φ) - 1`. The potential must have vanishing linear part.
    pub fn gradient(phi: &Jet<T>) -> Result<Self> {
        let comps = (0..phi.n())
            .map(|i| phi.derivative(i))
            .collect::<Result<_>>()?;
        VectorFieldJet::new(comps)
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    pub fn order(&self) -> usize {
        self.components[0].order()
    }

    pub fn components(&self) -> &[Jet<T>] {
        &self.components
    }

    /// `DX|_0`: entry `(i, j)` is the coefficient of `y_j` in `X^i`.
    pub fn linearization(&self) -> &DMatrix<T> {
        &self.linearization
    }

    /// The field as a single `vector:n` jet.
    pub fn to_vector_jet(&self) -> Jet<T> {
        Jet::from_components(&self.components).expect("components share n and order")
    }

    /// Linear part `D_0 = Σ_ij a_ij y_j ∂_i` as a field of the same order.
    pub fn linear_part(&self) -> Self {
        VectorFieldJet::linear(&self.linearization, self.order()).expect("square linearization")
    }

    pub fn to_order(&self, order: usize) -> Result<Self> {
        VectorFieldJet::new(self.components.iter().map(|c| c.to_order(order)).collect())
    }

    pub fn evaluate(&self, y: &[f64]) -> Result<Vec<T>> {
        self.components.iter().map(|c| c.evaluate_scalar(y)).collect()
    }

    /// Whether every eigenvalue of the linearization has positive real part.
    pub fn is_strictly_positive_source(&self) -> Result<bool> {
        let mu = crate::linalg::eigenvalues(&self.linearization)?;
        Ok(mu.iter().all(|z| z.re > 0.0))
    }

    /// `D_X u = Σ_i X^i ∂u/∂y_i`. Exact on `P_N`: since `X(0) = 0` the term
    /// of degree `d` only involves `∂u` up to degree `d - 1`.
    pub fn apply(&self, u: &Jet<T>) -> Result<Jet<T>> {
        if u.n() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: u.n(),
                context: "directional derivative variables",
            });
        }
        if u.order() != self.order() {
            return Err(Error::ShapeMismatch(format!(
                "directional derivative needs matching orders: field {}, jet {}",
                self.order(),
                u.order()
            )));
        }
        let order = u.order();
        let mut acc = Jet::zeros(u.n(), order, u.shape());
        for (i, xi) in self.components.iter().enumerate() {
            let du = u.derivative(i)?.to_order(order);
            acc = acc.add(&xi.mul(&du)?)?;
        }
        Ok(acc)
    }
}
