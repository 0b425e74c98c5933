//! Heat-kernel transport coefficients on flat `ℝⁿ` for `L = Δ + K`, with
//! `Δ = −Σ ∂²` and a matrix potential `K`.
//!
//! With the radial field `X = Σ xᵢ ∂ᵢ` the coefficients solve
//!
//! ```text
//! D_X Φ₀ = 0,  Φ₀(0) = id,     (D_X + j) Φⱼ = −L Φ_{j−1}   (j ≥ 1),
//! ```
//!
//! and `λ = −j` is never an eigenvalue for `j ≥ 1`, so each `Φⱼ` is unique.
//! On flat space the parallel transport and the density factor are trivial,
//! which makes `Φ₀ = id` and
//! `Φⱼ(q) = −∫₀¹ s^{j−1} (L Φ_{j−1})(s q) ds`.
//!
//! Each application of `Δ` costs two orders: `Φⱼ` is known to order `N − 2j`.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::quadrature::gauss_legendre;
use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::jet::{Jet, ValueShape, VectorFieldJet};
use crate::problem::ProblemData;
use crate::spectral::kernel_basis;
use crate::taylor::solve_to_order;

#[derive(Clone, Debug)]
pub struct HeatProblem {
    pub n: usize,
    pub m: usize,
    /// Matrix jet of the potential.
    pub k: Jet<f64>,
    /// Number of coefficients after `Φ₀`.
    pub terms: usize,
    pub order: usize,
}

impl HeatProblem {
    pub fn new(k: Jet<f64>, terms: usize, order: usize) -> Result<Self> {
        let m = match k.shape() {
            ValueShape::Matrix(m) => m,
            ValueShape::Scalar => 1,
            other => {
                return Err(Error::ShapeMismatch(format!(
                    "the potential must be a matrix jet, found {other}"
                )))
            }
        };
        let k = if k.shape() == ValueShape::Scalar {
            Jet::from_coeffs(k.n(), k.order(), ValueShape::Matrix(1), k.coeffs().to_vec())?
        } else {
            k
        };
        Ok(HeatProblem {
            n: k.n(),
            m,
            k,
            terms,
            order,
        })
    }

    fn check_budget(&self) -> Result<()> {
        if self.order < 2 * self.terms + 1 {
            return Err(Error::OrderBudget(format!(
                "{} coefficients need order at least {}, got {}",
                self.terms,
                2 * self.terms + 1,
                self.order
            )));
        }
        Ok(())
    }

    /// `L Φ = ΔΦ + KΦ` at order `order(Φ) − 2`.
    pub fn apply_l(&self, phi: &Jet<f64>) -> Result<Jet<f64>> {
        let lap = phi.laplacian()?;
        let o = lap.order();
        let k = self.k.to_order(o);
        lap.add(&k.mul(&phi.project(o)?)?)
    }
}

/// `Φ₀, …, Φ_J` as matrix jets; `Φⱼ` has order `N − 2j`.
pub fn heat_coefficients_jet(h: &HeatProblem) -> Result<Vec<Jet<f64>>> {
    h.check_budget()?;
    let (n, m) = (h.n, h.m);
    let cfg = SolverConfig::default();

    let p0 = ProblemData::new(
        VectorFieldJet::euler(n, h.order),
        Jet::zeros(n, h.order, ValueShape::Matrix(m)),
        Jet::zeros(n, h.order, ValueShape::Vector(m)),
        0.0,
    )?;
    let ker = kernel_basis(&p0, &cfg)?;
    if ker.dim() != m {
        return Err(Error::InvalidInput(format!(
            "expected an {m}-dimensional kernel at j = 0, found {}",
            ker.dim()
        )));
    }
    // Normalize by the initial condition Φ₀(0) = id.
    let w0 = DMatrix::from_fn(m, m, |r, c| ker.basis[c].coeffs()[r]);
    let inv = w0
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("kernel constants are degenerate".into()))?;
    let cols: Vec<Jet<f64>> = (0..m)
        .map(|c| {
            let mut acc = Jet::zeros(n, h.order, ValueShape::Vector(m));
            for (k, w) in ker.basis.iter().enumerate() {
                acc = acc.add(&w.to_order(h.order).scale(inv[(k, c)]))?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut out = vec![Jet::from_columns(&cols)?];

    for j in 1..=h.terms {
        let order = h.order - 2 * j;
        let rhs = h.apply_l(&out[j - 1])?.neg();
        let x = VectorFieldJet::euler(n, order);
        let zero_a = Jet::zeros(n, order, ValueShape::Matrix(m));
        let mut cols = Vec::with_capacity(m);
        for c in 0..m {
            let p = ProblemData::new(x.clone(), zero_a.clone(), rhs.column(c)?, -(j as f64))?;
            let sol = solve_to_order(&p, order, &cfg)?;
            if sol.resonance.is_some() || !sol.kernel.is_empty() {
                return Err(Error::InvalidInput(format!("λ = -{j} is unexpectedly resonant")));
            }
            cols.push(sol.particular.ok_or(Error::Unsolvable {
                count: sol.obstructions.len(),
                largest: 0.0,
            })?);
        }
        out.push(Jet::from_columns(&cols)?);
    }
    Ok(out)
}

/// Result of the quadrature path with its self-check.
#[derive(Clone, Debug)]
pub struct HeatValues {
    /// `Φⱼ(0, q)` for `j = 0..=J`.
    pub values: Vec<DMatrix<f64>>,
    /// Largest difference between the `n`- and `2n`-node rules.
    pub quadrature_difference: f64,
}

/// `Φⱼ(0, q)` by Gauss–Legendre quadrature along `s ↦ s q`.
///
/// The potential enters pointwise through `k_at`; the Laplacian of
/// `Φ_{j−1}` comes from the jets of `h` (hybrid evaluation).
pub fn heat_coefficients_numeric(
    h: &HeatProblem,
    k_at: Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>,
    q: &[f64],
    nodes: usize,
    tol: f64,
) -> Result<HeatValues> {
    if q.len() != h.n {
        return Err(Error::DimensionMismatch {
            expected: h.n,
            found: q.len(),
            context: "heat evaluation point",
        });
    }
    let jets = heat_coefficients_jet(h)?;
    let laps: Vec<Jet<f64>> = jets[..h.terms]
        .iter()
        .map(|p| p.laplacian())
        .collect::<Result<_>>()?;
    let eval = |nn: usize| -> Result<Vec<DMatrix<f64>>> {
        let rule = gauss_legendre(nn);
        let walker = Walker {
            k_at: &*k_at,
            laps: &laps,
            rule: &rule,
            m: h.m,
        };
        (0..=h.terms).map(|j| walker.phi(j, q)).collect()
    };
    let a = eval(nodes)?;
    let b = eval(2 * nodes)?;
    let diff = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).amax())
        .fold(0.0, f64::max);
    let scale = b.iter().map(|x| x.amax()).fold(1.0, f64::max);
    if diff > tol * scale {
        return Err(Error::Quadrature {
            nodes: 2 * nodes,
            difference: diff,
        });
    }
    Ok(HeatValues {
        values: b,
        quadrature_difference: diff,
    })
}

struct Walker<'a> {
    k_at: &'a (dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync),
    laps: &'a [Jet<f64>],
    rule: &'a (Vec<f64>, Vec<f64>),
    m: usize,
}

impl Walker<'_> {
    fn phi(&self, j: usize, q: &[f64]) -> Result<DMatrix<f64>> {
        if j == 0 {
            return Ok(DMatrix::identity(self.m, self.m));
        }
        let mut acc = DMatrix::zeros(self.m, self.m);
        let mut p = vec![0.0; q.len()];
        for (&s, &w) in self.rule.0.iter().zip(&self.rule.1) {
            for (pi, qi) in p.iter_mut().zip(q) {
                *pi = s * qi;
            }
            let lphi = self.laps[j - 1].evaluate_matrix(&p)? + (self.k_at)(&p) * self.phi(j - 1, &p)?;
            acc += lphi * (w * s.powi(j as i32 - 1));
        }
        Ok(-acc)
    }
}

/// Residual `(D_X + j)Φⱼ + LΦ_{j−1}` as a jet of order `N − 2j`.
pub fn heat_residual(h: &HeatProblem, phis: &[Jet<f64>], j: usize) -> Result<Jet<f64>> {
    let phi = &phis[j];
    let x = VectorFieldJet::euler(h.n, phi.order());
    let mut r = x.apply(phi)?.add(&phi.scale(j as f64))?;
    if j > 0 {
        r = r.add(&h.apply_l(&phis[j - 1])?)?;
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::MultiIndex;

    fn scalar_k(n: usize, order: usize, terms: &[(Vec<u32>, f64)]) -> Jet<f64> {
        Jet::from_terms(
            n,
            order,
            ValueShape::Matrix(1),
            terms.iter().map(|(a, c)| (MultiIndex::new(a.clone()), vec![*c])),
        )
        .unwrap()
    }

    #[test]
    fn constant_potential_gives_exponential_series() {
        let c = 0.8;
        let h = HeatProblem::new(scalar_k(2, 9, &[(vec![0, 0], c)]), 4, 9).unwrap();
        let phis = heat_coefficients_jet(&h).unwrap();
        let mut fact = 1.0;
        for (j, p) in phis.iter().enumerate() {
            if j > 0 {
                fact *= j as f64;
            }
            let want = (-c).powi(j as i32) / fact;
            assert!((p.coeffs()[0] - want).abs() < 1e-14);
            assert!(p.coeffs()[1..].iter().all(|x| x.abs() < 1e-14));
        }
    }

    #[test]
    fn quadratic_potential_first_coefficient() {
        let h = HeatProblem::new(scalar_k(2, 5, &[(vec![2, 0], 1.0)]), 2, 5).unwrap();
        let phis = heat_coefficients_jet(&h).unwrap();
        assert!((phis[1].coeff(&MultiIndex::new(vec![2, 0]))[0] + 1.0 / 3.0).abs() < 1e-14);
        for j in 0..phis.len() {
            assert!(heat_residual(&h, &phis, j).unwrap().max_abs() < 1e-13);
        }
        let k_at = Arc::new(|p: &[f64]| DMatrix::from_element(1, 1, p[0] * p[0]));
        let v = heat_coefficients_numeric(&h, k_at, &[1.0, 0.0], 8, 1e-10).unwrap();
        assert!((v.values[1][(0, 0)] + 1.0 / 3.0).abs() < 1e-12);
    }
}
