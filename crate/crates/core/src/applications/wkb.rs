//! Formal WKB expansion for `ℏ²Δ + V` in one dimension near a
//! nondegenerate minimum `V = μ²x² + O(x³)`, with `Δ = −d²/dx²`.
//!
//! With `ψ = e^{−φ/ℏ} Σ ℏʲ aⱼ` and eigenvalue `E = ℏ Σ ℏʲ λⱼ`:
//!
//! * eiconal: `(φ')² = V`, solved as `φ' = μx·sqrt(1 + w)` where
//!   `V = μ²x²(1 + w)`;
//! * transport: `(D_X + φ'' − λ₀) aⱼ = −Δa_{j−1} + Σ_{i=1}^{j} λᵢ a_{j−i}` with
//!   `X = 2φ' ∂ₓ`, so `λ₀ = (2α + 1)μ` for the level `α`.
//!
//! `λⱼ` is fixed by requiring the dual kernel element to annihilate the right
//! side. `aⱼ` for `j ≥ 1` is the minimal-norm solution, which sets its
//! `x^α` coefficient to zero.

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::jet::{Jet, MultiIndex, ValueShape, VectorFieldJet};
use crate::problem::ProblemData;
use crate::spectral::dual_kernel_basis;
use crate::taylor::solve_to_order;

#[derive(Clone, Debug)]
pub struct WkbProblem {
    /// Scalar jet in one variable.
    pub v: Jet<f64>,
    pub level: u32,
    /// Number of corrections `λ₁, …, λ_J`.
    pub terms: usize,
    /// Coefficient of `x^α` in `a₀`.
    pub normalization: f64,
}

impl WkbProblem {
    pub fn new(v: Jet<f64>, level: u32, terms: usize) -> Self {
        WkbProblem {
            v,
            level,
            terms,
            normalization: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct WkbExpansion {
    pub mu: f64,
    pub phi: Jet<f64>,
    pub lambdas: Vec<f64>,
    /// `aⱼ` as scalar jets; `aⱼ` has order `N − 2 − 2j`.
    pub amplitudes: Vec<Jet<f64>>,
}

impl WkbExpansion {
    /// `E(ℏ) = ℏ Σ ℏʲ λⱼ`.
    pub fn energy(&self, hbar: f64) -> f64 {
        hbar * self
            .lambdas
            .iter()
            .rev()
            .fold(0.0, |acc, l| acc * hbar + l)
    }
}

fn as_vector(j: &Jet<f64>) -> Result<Jet<f64>> {
    Jet::from_coeffs(j.n(), j.order(), ValueShape::Vector(1), j.coeffs().to_vec())
}

fn as_scalar(j: &Jet<f64>) -> Result<Jet<f64>> {
    Jet::from_coeffs(j.n(), j.order(), ValueShape::Scalar, j.coeffs().to_vec())
}

/// Positive solution `φ` of the eiconal equation, as a jet of the order of `V`.
pub fn eiconal(v: &Jet<f64>) -> Result<(f64, Jet<f64>)> {
    if v.n() != 1 || v.shape() != ValueShape::Scalar {
        return Err(Error::InvalidInput(
            "the potential must be a scalar jet in one variable".into(),
        ));
    }
    let order = v.order();
    if order < 3 {
        return Err(Error::OrderBudget("the potential needs order at least 3".into()));
    }
    let c = v.coeffs();
    let scale = c.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1.0);
    if c[0].abs() > 1e-12 * scale || c[1].abs() > 1e-12 * scale {
        return Err(Error::InvalidInput(
            "the potential must vanish to second order at the origin".into(),
        ));
    }
    if !(c[2] > 0.0) {
        return Err(Error::InvalidInput(
            "the minimum must be nondegenerate (positive quadratic coefficient)".into(),
        ));
    }
    let mu = c[2].sqrt();
    // 1 + w = V / (μ² x²)
    let one_plus_w = Jet::from_coeffs(
        1,
        order - 2,
        ValueShape::Scalar,
        c[2..].iter().map(|x| x / c[2]).collect(),
    )?;
    let s = one_plus_w.sqrt()?;
    let x = Jet::coordinate(1, order - 1, 0);
    let dphi = x.mul(&s.to_order(order - 1))?.scale(mu);
    Ok((mu, dphi.antiderivative(0)))
}

pub fn wkb_expand(w: &WkbProblem) -> Result<WkbExpansion> {
    let cfg = SolverConfig::default();
    let (mu, phi) = eiconal(&w.v)?;
    let order = w.v.order();
    let alpha = w.level as usize;
    let top = order as isize - 2 - 2 * w.terms as isize;
    if top < alpha.max(1) as isize {
        return Err(Error::OrderBudget(format!(
            "order {order} leaves {top} for the last amplitude; level {alpha} needs at least {}",
            alpha.max(1)
        )));
    }
    let base = order - 2;
    let dphi = phi.derivative(0)?;
    let x = VectorFieldJet::new(vec![dphi.scale(2.0).to_order(base)])?;
    let a = Jet::from_coeffs(
        1,
        base,
        ValueShape::Matrix(1),
        dphi.derivative(0)?.coeffs().to_vec(),
    )?;
    let lambda0 = (2.0 * alpha as f64 + 1.0) * mu;
    let zero = Jet::zeros(1, base, ValueShape::Vector(1));
    let p = ProblemData::new(x, a, zero, lambda0)?;

    let sol0 = solve_to_order(&p, base, &cfg)?;
    let res = sol0
        .resonance
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("λ₀ is not an eigenvalue".into()))?;
    if res.multiplicity() != 1 || sol0.kernel.len() != 1 {
        return Err(Error::InvalidInput(format!(
            "degenerate level: multiplicity {}, kernel dimension {}",
            res.multiplicity(),
            sol0.kernel.len()
        )));
    }
    let xa = MultiIndex::new(vec![w.level]);
    let k0 = &sol0.kernel[0];
    let lead = k0.coeff(&xa)[0];
    let a0 = k0.scale(w.normalization / lead);

    let dual = dual_kernel_basis(&p.with_order(alpha.max(1))?, &cfg)?;
    if dual.dim() != 1 {
        return Err(Error::InvalidInput(format!(
            "dual kernel has dimension {}",
            dual.dim()
        )));
    }
    let t = &dual.basis[0];
    let t_a0 = t.pair(&a0)?;

    let mut lambdas = vec![lambda0];
    let mut amps = vec![a0];
    for j in 1..=w.terms {
        let oj = base - 2 * j;
        let prev = as_scalar(&amps[j - 1])?;
        let mut r = as_vector(&prev.laplacian()?)?.neg();
        for i in 1..j {
            r = r.add(&amps[j - i].to_order(oj).scale(lambdas[i]))?;
        }
        let r = r.to_order(oj);
        let lj = -t.pair(&r)? / t_a0;
        let rhs = r.add(&amps[0].to_order(oj).scale(lj))?;
        let pj = p.with_order(oj)?.with_v(rhs)?;
        let sj = solve_to_order(&pj, oj, &cfg)?;
        let aj = sj.particular.ok_or_else(|| Error::Unsolvable {
            count: sj.obstructions.len(),
            largest: sj.obstructions.iter().fold(0.0, |m, o| f64::max(m, o.abs())),
        })?;
        lambdas.push(lj);
        amps.push(aj);
    }
    Ok(WkbExpansion {
        mu,
        phi,
        lambdas,
        amplitudes: amps.iter().map(as_scalar).collect::<Result<_>>()?,
    })
}
