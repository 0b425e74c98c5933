//! Truncated multivariate Taylor polynomials (jets) with scalar, vector or
//! matrix coefficients.
//!
//! A jet of order `N` in `n` variables stands for the class of a smooth
//! function modulo functions vanishing to order `N + 1` at the origin, i.e.
//! an element of `P_N`. Coefficients are Taylor-normalized: the coefficient
//! stored at `α` is the coefficient of the monomial `y^α`, which equals
//! `D^α u(0) / α!`. Storage is dense, monomial-major in graded-lex order with
//! the value index running fastest, so the coefficient vector of a
//! vector-valued jet is exactly its coordinate vector in the basis
//! `y^α e_j` used by the operator matrices.

mod index;
mod vector_field;

pub use index::{monomial_count, MonomialBasis, MultiIndex};
pub use vector_field::VectorFieldJet;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Shape of a single coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ValueShape {
    Scalar,
    Vector(usize),
    /// Square `m x m` matrix, stored row-major.
    Matrix(usize),
}

impl ValueShape {
    /// Number of scalar entries per coefficient.
    pub fn len(self) -> usize {
        match self {
            ValueShape::Scalar => 1,
            ValueShape::Vector(m) => m,
            ValueShape::Matrix(m) => m * m,
        }
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for ValueShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueShape::Scalar => f.write_str("scalar"),
            ValueShape::Vector(m) => write!(f, "vector:{m}"),
            ValueShape::Matrix(m) => write!(f, "matrix:{m}"),
        }
    }
}

impl std::str::FromStr for ValueShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Json(format!("unknown shape `{s}`"));
        if s == "scalar" {
            return Ok(ValueShape::Scalar);
        }
        let (kind, m) = s.split_once(':').ok_or_else(bad)?;
        let m: usize = m.parse().map_err(|_| bad())?;
        if m == 0 {
            return Err(bad());
        }
        match kind {
            "vector" => Ok(ValueShape::Vector(m)),
            "matrix" => Ok(ValueShape::Matrix(m)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for ValueShape {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ValueShape {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Lowest degree carrying a nonzero coefficient; the zero jet vanishes to
/// infinite order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum VanishingOrder {
    Finite(usize),
    Infinite,
}

impl VanishingOrder {
    /// `true` when the jet lies in `m^k`.
    pub fn at_least(self, k: usize) -> bool {
        match self {
            VanishingOrder::Finite(d) => d >= k,
            VanishingOrder::Infinite => true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Jet<T> {
    basis: Arc<MonomialBasis>,
    shape: ValueShape,
    coeffs: Vec<T>,
}

impl<T: PartialEq> PartialEq for Jet<T> {
    fn eq(&self, other: &Self) -> bool {
        self.basis.n() == other.basis.n()
            && self.basis.order() == other.basis.order()
            && self.shape == other.shape
            && self.coeffs == other.coeffs
    }
}

impl<T: Scalar> Jet<T> {
    pub fn zeros(n: usize, order: usize, shape: ValueShape) -> Self {
        assert!(n > 0, "jets need at least one variable");
        let basis = MonomialBasis::get(n, order);
        let coeffs = vec![T::zero(); basis.len() * shape.len()];
        Jet {
            basis,
            shape,
            coeffs,
        }
    }

    /// Builds a jet from its full coefficient vector (monomial-major, value index fastest).
    pub fn from_coeffs(n: usize, order: usize, shape: ValueShape, coeffs: Vec<T>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("jets need at least one variable".into()));
        }
        let basis = MonomialBasis::get(n, order);
        let expected = basis.len() * shape.len();
        if coeffs.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: coeffs.len(),
                context: "jet coefficient vector",
            });
        }
        Ok(Jet {
            basis,
            shape,
            coeffs,
        })
    }

    /// Builds a jet from sparse `(α, coefficient block)` terms; repeated
    /// multi-indices accumulate.
    pub fn from_terms<I>(n: usize, order: usize, shape: ValueShape, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, Vec<T>)>,
    {
        if n == 0 {
            return Err(Error::InvalidInput("jets need at least one variable".into()));
        }
        let mut jet = Jet::zeros(n, order, shape);
        for (alpha, block) in terms {
            if alpha.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: alpha.n(),
                    context: "multi-index length",
                });
            }
            if alpha.degree() > order {
                return Err(Error::OrderTooHigh {
                    requested: alpha.degree(),
                    available: order,
                });
            }
            if block.len() != shape.len() {
                return Err(Error::DimensionMismatch {
                    expected: shape.len(),
                    found: block.len(),
                    context: "coefficient block",
                });
            }
            let k = jet.basis.rank(alpha.entries());
            for (c, b) in jet.block_mut(k).iter_mut().zip(block) {
                *c += b;
            }
        }
        Ok(jet)
    }

    pub fn constant(n: usize, order: usize, value: T) -> Self {
        let mut j = Jet::zeros(n, order, ValueShape::Scalar);
        j.coeffs[0] = value;
        j
    }

    /// The coordinate function `y_i` (zero-based `i`).
    pub fn coordinate(n: usize, order: usize, i: usize) -> Self {
        Jet::monomial(n, order, &MultiIndex::unit(n, i), T::one())
    }

    /// `c · y^α`, or the zero jet when `|α| > order`.
    pub fn monomial(n: usize, order: usize, alpha: &MultiIndex, c: T) -> Self {
        let mut j = Jet::zeros(n, order, ValueShape::Scalar);
        if alpha.degree() <= order {
            let k = j.basis.rank(alpha.entries());
            j.coeffs[k] = c;
        }
        j
    }

    pub fn constant_vector(n: usize, order: usize, v: &DVector<T>) -> Self {
        let mut j = Jet::zeros(n, order, ValueShape::Vector(v.len()));
        j.coeffs[..v.len()].copy_from_slice(v.as_slice());
        j
    }

    pub fn constant_matrix(n: usize, order: usize, a: &DMatrix<T>) -> Self {
        assert_eq!(a.nrows(), a.ncols(), "matrix jets are square");
        let m = a.nrows();
        let mut j = Jet::zeros(n, order, ValueShape::Matrix(m));
        for r in 0..m {
            for c in 0..m {
                j.coeffs[r * m + c] = a[(r, c)];
            }
        }
        j
    }

    pub fn identity(n: usize, order: usize, m: usize) -> Self {
        Jet::constant_matrix(n, order, &DMatrix::identity(m, m))
    }

    /// Vector jet whose components are the given scalar jets.
    pub fn from_components(parts: &[Jet<T>]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidInput("no components".into()))?;
        let m = parts.len();
        let mut out = Jet::zeros(first.n(), first.order(), ValueShape::Vector(m));
        for (j, p) in parts.iter().enumerate() {
            p.expect_scalar()?;
            out.check_compatible(p)?;
            for k in 0..out.basis.len() {
                out.coeffs[k * m + j] = p.coeffs[k];
            }
        }
        Ok(out)
    }

    /// Matrix jet from column vector jets.
    pub fn from_columns(cols: &[Jet<T>]) -> Result<Self> {
        let first = cols
            .first()
            .ok_or_else(|| Error::InvalidInput("no columns".into()))?;
        let m = cols.len();
        let mut out = Jet::zeros(first.n(), first.order(), ValueShape::Matrix(m));
        for (c, col) in cols.iter().enumerate() {
            if col.shape != ValueShape::Vector(m) {
                return Err(Error::ShapeMismatch(format!(
                    "column {c} has shape {}, expected vector:{m}",
                    col.shape
                )));
            }
            out.check_compatible(col)?;
            for k in 0..out.basis.len() {
                for r in 0..m {
                    out.coeffs[k * m * m + r * m + c] = col.coeffs[k * m + r];
                }
            }
        }
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.basis.n()
    }

    pub fn order(&self) -> usize {
        self.basis.order()
    }

    pub fn shape(&self) -> ValueShape {
        self.shape
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    /// Coefficient block of the `k`-th monomial in graded-lex order.
    pub fn block(&self, k: usize) -> &[T] {
        let s = self.shape.len();
        &self.coeffs[k * s..(k + 1) * s]
    }

    pub(crate) fn block_mut(&mut self, k: usize) -> &mut [T] {
        let s = self.shape.len();
        &mut self.coeffs[k * s..(k + 1) * s]
    }

    /// Coefficient block of `y^α`; zero for `|α| > order`.
    pub fn coeff(&self, alpha: &MultiIndex) -> Vec<T> {
        if alpha.degree() > self.order() || alpha.n() != self.n() {
            return vec![T::zero(); self.shape.len()];
        }
        self.block(self.basis.rank(alpha.entries())).to_vec()
    }

    /// Scalar coefficient of `y^α` (first entry of the block).
    pub fn scalar_coeff(&self, alpha: &MultiIndex) -> T {
        self.coeff(alpha)[0]
    }

    /// Nonzero terms in graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &[T])> + '_ {
        self.basis
            .monomials()
            .iter()
            .enumerate()
            .map(move |(k, a)| (a, self.block(k)))
            .filter(|(_, b)| b.iter().any(|c| !c.is_zero()))
    }

    pub(crate) fn check_compatible(&self, other: &Jet<T>) -> Result<()> {
        if self.n() != other.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: other.n(),
                context: "number of variables",
            });
        }
        if self.order() != other.order() {
            return Err(Error::ShapeMismatch(format!(
                "jet orders differ: {} vs {}",
                self.order(),
                other.order()
            )));
        }
        Ok(())
    }

    fn expect_scalar(&self) -> Result<()> {
        if self.shape != ValueShape::Scalar {
            return Err(Error::ShapeMismatch(format!(
                "expected a scalar jet, found {}",
                self.shape
            )));
        }
        Ok(())
    }

    fn zip_with(&self, other: &Jet<T>, f: impl Fn(T, T) -> T) -> Result<Jet<T>> {
        self.check_compatible(other)?;
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "{} vs {}",
                self.shape, other.shape
            )));
        }
        Ok(Jet {
            basis: self.basis.clone(),
            shape: self.shape,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Jet<T>) -> Result<Jet<T>> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Jet<T>) -> Result<Jet<T>> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: T) -> Jet<T> {
        self.map(|x| x * c)
    }

    pub fn neg(&self) -> Jet<T> {
        self.map(|x| -x)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Jet<T> {
        Jet {
            basis: self.basis.clone(),
            shape: self.shape,
            coeffs: self.coeffs.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Truncated Cauchy product. Supported shapes: scalar with anything,
    /// matrix times vector, matrix times matrix.
    pub fn mul(&self, other: &Jet<T>) -> Result<Jet<T>> {
        self.check_compatible(other)?;
        let out_shape = product_shape(self.shape, other.shape)?;
        let mut out = Jet::zeros(self.n(), self.order(), out_shape);
        let order = self.order();
        let basis = self.basis.clone();
        let mons = basis.monomials();
        let mut exps = vec![0u32; self.n()];
        for (ka, a) in mons.iter().enumerate() {
            let ba = self.block(ka);
            if ba.iter().all(|c| c.is_zero()) {
                continue;
            }
            let room = order - a.degree();
            for kb in 0..basis.degree_range(room).end {
                let bb = other.block(kb);
                if bb.iter().all(|c| c.is_zero()) {
                    continue;
                }
                for (e, (x, y)) in exps
                    .iter_mut()
                    .zip(a.entries().iter().zip(mons[kb].entries()))
                {
                    *e = x + y;
                }
                let kc = basis.rank(&exps);
                block_product_acc(self.shape, ba, other.shape, bb, out.block_mut(kc));
            }
        }
        Ok(out)
    }

    /// Truncation to `P_order`.
    pub fn project(&self, order: usize) -> Result<Jet<T>> {
        if order > self.order() {
            return Err(Error::OrderTooHigh {
                requested: order,
                available: self.order(),
            });
        }
        Ok(self.to_order(order))
    }

    /// Re-expresses the jet at another order: truncates, or pads with zero
    /// coefficients (treating the jet as a polynomial) when raising.
    pub fn to_order(&self, order: usize) -> Jet<T> {
        let basis = MonomialBasis::get(self.n(), order);
        let s = self.shape.len();
        let keep = basis.len().min(self.basis.len()) * s;
        let mut coeffs = vec![T::zero(); basis.len() * s];
        coeffs[..keep].copy_from_slice(&self.coeffs[..keep]);
        Jet {
            basis,
            shape: self.shape,
            coeffs,
        }
    }

    /// The homogeneous part of degree `d`, as a jet of the same order.
    pub fn homogeneous_part(&self, d: usize) -> Jet<T> {
        let mut out = Jet::zeros(self.n(), self.order(), self.shape);
        let s = self.shape.len();
        let r = self.basis.degree_range(d);
        out.coeffs[r.start * s..r.end * s].copy_from_slice(&self.coeffs[r.start * s..r.end * s]);
        out
    }

    /// Coefficients of the degree-`d` slice `H_d`, monomial-major.
    pub fn slice_coeffs(&self, d: usize) -> &[T] {
        let s = self.shape.len();
        let r = self.basis.degree_range(d);
        &self.coeffs[r.start * s..r.end * s]
    }

    pub(crate) fn slice_coeffs_mut(&mut self, d: usize) -> &mut [T] {
        let s = self.shape.len();
        let r = self.basis.degree_range(d);
        &mut self.coeffs[r.start * s..r.end * s]
    }

    pub fn vanishing_order(&self) -> VanishingOrder {
        self.vanishing_order_tol(0.0)
    }

    /// Vanishing order treating coefficients of modulus `<= tol` as zero.
    pub fn vanishing_order_tol(&self, tol: f64) -> VanishingOrder {
        for d in 0..=self.order() {
            if self.slice_coeffs(d).iter().any(|c| c.modulus() > tol) {
                return VanishingOrder::Finite(d);
            }
        }
        VanishingOrder::Infinite
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.modulus()).fold(0.0, f64::max)
    }

    pub fn norm(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|c| c.modulus_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// `∂u/∂y_i`, exact as a jet of order `N - 1`.
    pub fn derivative(&self, i: usize) -> Result<Jet<T>> {
        if self.order() == 0 {
            return Err(Error::OrderBudget(
                "cannot differentiate a jet of order 0".into(),
            ));
        }
        if i >= self.n() {
            return Err(Error::InvalidInput(format!("variable index {i} out of range")));
        }
        let mut out = Jet::zeros(self.n(), self.order() - 1, self.shape);
        let mons = self.basis.monomials();
        let mut exps = vec![0u32; self.n()];
        for (k, a) in mons.iter().enumerate() {
            let ai = a.entries()[i];
            if ai == 0 {
                continue;
            }
            exps.copy_from_slice(a.entries());
            exps[i] -= 1;
            let kd = out.basis.rank(&exps);
            let f = T::from_real(f64::from(ai));
            let src = self.block(k).to_vec();
            for (o, c) in out.block_mut(kd).iter_mut().zip(src) {
                *o = c * f;
            }
        }
        Ok(out)
    }

    /// Antiderivative in `y_i` vanishing on `{y_i = 0}`, of order `N + 1`.
    pub fn antiderivative(&self, i: usize) -> Jet<T> {
        let mut out = Jet::zeros(self.n(), self.order() + 1, self.shape);
        let mut exps = vec![0u32; self.n()];
        for (k, a) in self.basis.monomials().iter().enumerate() {
            exps.copy_from_slice(a.entries());
            exps[i] += 1;
            let kd = out.basis.rank(&exps);
            let f = T::from_real(f64::from(exps[i]));
            let src = self.block(k).to_vec();
            for (o, c) in out.block_mut(kd).iter_mut().zip(src) {
                *o = c / f;
            }
        }
        out
    }

    /// Laplace-Beltrami operator of flat space with the geometer's sign,
    /// `Δ = -Σ ∂²/∂y_i²`, as a jet of order `N - 2`.
    pub fn laplacian(&self) -> Result<Jet<T>> {
        if self.order() < 2 {
            return Err(Error::OrderBudget(
                "the Laplacian needs a jet of order at least 2".into(),
            ));
        }
        let mut acc = Jet::zeros(self.n(), self.order() - 2, self.shape);
        for i in 0..self.n() {
            let d2 = self.derivative(i)?.derivative(i)?;
            acc = acc.sub(&d2)?;
        }
        Ok(acc)
    }

    /// `D_X u = Σ_i X^i ∂u/∂y_i`, exact at the jet's order because `X`
    /// has no constant term.
    pub fn directional_derivative(&self, x: &VectorFieldJet<T>) -> Result<Jet<T>> {
        x.apply(self)
    }

    /// Evaluates the polynomial at a real point; returns the coefficient block.
    pub fn evaluate(&self, y: &[f64]) -> Result<Vec<T>> {
        if y.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: y.len(),
                context: "evaluation point",
            });
        }
        let s = self.shape.len();
        let mut out = vec![T::zero(); s];
        // powers[i][e] = y_i^e
        let powers: Vec<Vec<f64>> = y
            .iter()
            .map(|&yi| {
                let mut p = Vec::with_capacity(self.order() + 1);
                let mut acc = 1.0;
                for _ in 0..=self.order() {
                    p.push(acc);
                    acc *= yi;
                }
                p
            })
            .collect();
        for (k, a) in self.basis.monomials().iter().enumerate() {
            let w: f64 = a
                .entries()
                .iter()
                .enumerate()
                .map(|(i, &e)| powers[i][e as usize])
                .product();
            if w == 0.0 {
                continue;
            }
            let w = T::from_real(w);
            for (o, &c) in out.iter_mut().zip(self.block(k)) {
                *o += c * w;
            }
        }
        Ok(out)
    }

    pub fn evaluate_scalar(&self, y: &[f64]) -> Result<T> {
        self.expect_scalar()?;
        Ok(self.evaluate(y)?[0])
    }

    pub fn evaluate_vector(&self, y: &[f64]) -> Result<DVector<T>> {
        Ok(DVector::from_vec(self.evaluate(y)?))
    }

    pub fn evaluate_matrix(&self, y: &[f64]) -> Result<DMatrix<T>> {
        match self.shape {
            ValueShape::Matrix(m) => Ok(DMatrix::from_row_slice(m, m, &self.evaluate(y)?)),
            other => Err(Error::ShapeMismatch(format!(
                "expected a matrix jet, found {other}"
            ))),
        }
    }

    /// Constant term as a matrix (for matrix jets).
    pub fn constant_term_matrix(&self) -> Result<DMatrix<T>> {
        match self.shape {
            ValueShape::Matrix(m) => Ok(DMatrix::from_row_slice(m, m, self.block(0))),
            other => Err(Error::ShapeMismatch(format!(
                "expected a matrix jet, found {other}"
            ))),
        }
    }

    /// Scalar component `j` of a vector jet.
    pub fn component(&self, j: usize) -> Result<Jet<T>> {
        let m = match self.shape {
            ValueShape::Vector(m) if j < m => m,
            other => {
                return Err(Error::ShapeMismatch(format!(
                    "component {j} of a {other} jet"
                )))
            }
        };
        let coeffs = (0..self.basis.len()).map(|k| self.coeffs[k * m + j]).collect();
        Ok(Jet {
            basis: self.basis.clone(),
            shape: ValueShape::Scalar,
            coeffs,
        })
    }

    /// Column `c` of a matrix jet, as a vector jet.
    pub fn column(&self, c: usize) -> Result<Jet<T>> {
        let m = match self.shape {
            ValueShape::Matrix(m) if c < m => m,
            other => return Err(Error::ShapeMismatch(format!("column {c} of a {other} jet"))),
        };
        let mut coeffs = Vec::with_capacity(self.basis.len() * m);
        for k in 0..self.basis.len() {
            for r in 0..m {
                coeffs.push(self.coeffs[k * m * m + r * m + c]);
            }
        }
        Ok(Jet {
            basis: self.basis.clone(),
            shape: ValueShape::Vector(m),
            coeffs,
        })
    }

    /// Square root of a scalar jet with nonzero constant term (principal
    /// branch), computed degree by degree from `s·s = u`.
    pub fn sqrt(&self) -> Result<Jet<T>> {
        self.expect_scalar()?;
        let c0 = self.coeffs[0];
        if c0.is_zero() {
            return Err(Error::InvalidInput(
                "square root of a jet with zero constant term".into(),
            ));
        }
        if T::FIELD == crate::scalar::Field::Real && c0.real() < 0.0 {
            return Err(Error::InvalidInput(
                "real square root of a jet with negative constant term".into(),
            ));
        }
        let s0 = c0.sqrt();
        let two_s0 = s0 + s0;
        let mut s = Jet::constant(self.n(), self.order(), s0);
        for d in 1..=self.order() {
            let sq = s.mul(&s)?;
            let r = self.basis.degree_range(d);
            for k in r {
                s.coeffs[k] = (self.coeffs[k] - sq.coeffs[k]) / two_s0;
            }
        }
        Ok(s)
    }

    /// Transpose of a matrix jet.
    pub fn transpose(&self) -> Result<Jet<T>> {
        let m = match self.shape {
            ValueShape::Matrix(m) => m,
            other => return Err(Error::ShapeMismatch(format!("transpose of a {other} jet"))),
        };
        let mut out = self.clone();
        for k in 0..self.basis.len() {
            for r in 0..m {
                for c in 0..m {
                    out.coeffs[k * m * m + r * m + c] = self.coeffs[k * m * m + c * m + r];
                }
            }
        }
        Ok(out)
    }

    pub fn to_complex(&self) -> Jet<Complex64> {
        Jet {
            basis: self.basis.clone(),
            shape: self.shape,
            coeffs: self.coeffs.iter().map(|c| c.to_complex()).collect(),
        }
    }
}

impl Jet<Complex64> {
    /// Real part, provided every imaginary part is at most `tol` in modulus.
    pub fn try_to_real(&self, tol: f64) -> Option<Jet<f64>> {
        if self.coeffs.iter().any(|c| c.im.abs() > tol) {
            return None;
        }
        Some(Jet {
            basis: self.basis.clone(),
            shape: self.shape,
            coeffs: self.coeffs.iter().map(|c| c.re).collect(),
        })
    }
}

fn product_shape(a: ValueShape, b: ValueShape) -> Result<ValueShape> {
    use ValueShape::*;
    match (a, b) {
        (Scalar, s) | (s, Scalar) => Ok(s),
        (Matrix(p), Vector(q)) if p == q => Ok(Vector(p)),
        (Matrix(p), Matrix(q)) if p == q => Ok(Matrix(p)),
        _ => Err(Error::ShapeMismatch(format!("cannot multiply {a} by {b}"))),
    }
}

fn block_product_acc<T: Scalar>(sa: ValueShape, a: &[T], sb: ValueShape, b: &[T], out: &mut [T]) {
    use ValueShape::*;
    match (sa, sb) {
        (Scalar, _) => {
            for (o, &y) in out.iter_mut().zip(b) {
                *o += a[0] * y;
            }
        }
        (_, Scalar) => {
            for (o, &x) in out.iter_mut().zip(a) {
                *o += x * b[0];
            }
        }
        (Matrix(m), Vector(_)) => {
            for r in 0..m {
                let mut acc = T::zero();
                for c in 0..m {
                    acc += a[r * m + c] * b[c];
                }
                out[r] += acc;
            }
        }
        (Matrix(m), Matrix(_)) => {
            for r in 0..m {
                for c in 0..m {
                    let mut acc = T::zero();
                    for k in 0..m {
                        acc += a[r * m + k] * b[k * m + c];
                    }
                    out[r * m + c] += acc;
                }
            }
        }
        _ => unreachable!("shape checked by product_shape"),
    }
}
