//! Eigenvalue and resonance enumeration, kernels and dual kernels on `P_N`,
//! and the Fredholm solvability test.
//!
//! `λ` is an eigenvalue of `D_X + A` exactly when `λ = α·μ + ρ_j` for a
//! multi-index `α`, an eigenvalue `μ` of the linearization of `X` and an
//! eigenvalue `ρ_j` of `A(0)`. The number of such representations is the
//! multiplicity `m(λ)`; the largest `|α|` among them is the order beyond
//! which every slice equation is uniquely solvable.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::jet::{monomial_count, Jet, MonomialBasis, MultiIndex, ValueShape, VectorFieldJet};
use crate::linalg::{self, RankReport};
use crate::operator::assemble;
use crate::problem::ProblemData;
use crate::scalar::{cmp_complex, complex_json, Scalar};

/// Refuse searches over more multi-indices than this.
const MAX_SEARCH: usize = 5_000_000;

/// One way of writing `λ = α·μ + ρ_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Representation {
    pub alpha: MultiIndex,
    pub rho_index: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResonanceEntry {
    pub lambda: Complex64,
    /// Graded-lex in `α`, then by `rho_index`.
    pub reps: Vec<Representation>,
}

impl ResonanceEntry {
    /// `m(λ)`.
    pub fn multiplicity(&self) -> usize {
        self.reps.len()
    }

    /// `max |α|` over the representations.
    pub fn max_alpha_degree(&self) -> usize {
        self.reps.iter().map(|r| r.alpha.degree()).max().unwrap_or(0)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "lambda": complex_json(self.lambda),
            "multiplicity": self.multiplicity(),
            "max_alpha_degree": self.max_alpha_degree(),
            "reps": self.reps.iter().map(|r| json!({
                "alpha": r.alpha.entries(),
                "rho_index": r.rho_index,
            })).collect::<Vec<_>>(),
        })
    }
}

/// A representation that misses `λ` by more than the resonance tolerance but
/// less than the near-resonance window.
#[derive(Clone, Debug, PartialEq)]
pub struct NearResonance {
    pub alpha: MultiIndex,
    pub rho_index: usize,
    pub distance: f64,
}

/// Eigenvalues of `DX|_0`, sorted by (real, imaginary) part.
pub fn linearization_spectrum<T: Scalar>(x: &VectorFieldJet<T>) -> Result<Vec<Complex64>> {
    linalg::eigenvalues(x.linearization())
}

/// Eigenvalues of `A(0)`, sorted by (real, imaginary) part.
pub fn endo_spectrum<T: Scalar>(a0: &DMatrix<T>) -> Result<Vec<Complex64>> {
    linalg::eigenvalues(a0)
}

/// `ν = min Re μ`, failing unless the source is strictly positive.
pub fn source_rate(mu: &[Complex64]) -> Result<f64> {
    let nu = mu.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::NotPositiveSource {
            min_re: if mu.is_empty() { f64::NAN } else { nu },
        });
    }
    Ok(nu)
}

fn search_degree(mu: &[Complex64], rho: &[Complex64], max_re: f64, tol: f64) -> Result<usize> {
    let nu = source_rate(mu)?;
    if rho.is_empty() {
        return Err(Error::InvalidInput("empty spectrum of A(0)".into()));
    }
    let min_rho = rho.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    let bound = (max_re - min_rho + tol) / nu;
    if bound < 0.0 {
        return Ok(0);
    }
    let d = bound.floor();
    if d > 1e6 || monomial_count(mu.len(), d as usize) > MAX_SEARCH {
        return Err(Error::InvalidInput(format!(
            "resonance search up to degree {d} is too large"
        )));
    }
    Ok(d as usize)
}

/// All representations of `λ` within `tol`, or `None` when `λ` is not an
/// eigenvalue.
pub fn enumerate_resonances(
    mu: &[Complex64],
    rho: &[Complex64],
    lambda: Complex64,
    tol: f64,
) -> Result<Option<ResonanceEntry>> {
    let d = search_degree(mu, rho, lambda.re, tol)?;
    let basis = MonomialBasis::get(mu.len(), d);
    let mut reps = Vec::new();
    for alpha in basis.monomials() {
        let am = alpha.dot(mu);
        for (j, r) in rho.iter().enumerate() {
            if (am + r - lambda).norm() <= tol {
                reps.push(Representation {
                    alpha: alpha.clone(),
                    rho_index: j,
                });
            }
        }
    }
    Ok((!reps.is_empty()).then_some(ResonanceEntry { lambda, reps }))
}

/// Representations at distance in `(tol, near_tol]` from `λ`.
pub fn near_resonances(
    mu: &[Complex64],
    rho: &[Complex64],
    lambda: Complex64,
    tol: f64,
    near_tol: f64,
) -> Result<Vec<NearResonance>> {
    let d = search_degree(mu, rho, lambda.re, near_tol)?;
    let basis = MonomialBasis::get(mu.len(), d);
    let mut out = Vec::new();
    for alpha in basis.monomials() {
        let am = alpha.dot(mu);
        for (j, r) in rho.iter().enumerate() {
            let distance = (am + r - lambda).norm();
            if distance > tol && distance <= near_tol {
                out.push(NearResonance {
                    alpha: alpha.clone(),
                    rho_index: j,
                    distance,
                });
            }
        }
    }
    Ok(out)
}

/// Every eigenvalue with real part at most `max_re`, with representations.
/// Values closer than `tol` are merged into one entry.
pub fn enumerate_spectrum(
    mu: &[Complex64],
    rho: &[Complex64],
    max_re: f64,
    tol: f64,
) -> Result<Vec<ResonanceEntry>> {
    let d = search_degree(mu, rho, max_re, tol)?;
    let basis = MonomialBasis::get(mu.len(), d);
    let mut entries: Vec<ResonanceEntry> = Vec::new();
    for alpha in basis.monomials() {
        let am = alpha.dot(mu);
        for (j, r) in rho.iter().enumerate() {
            let z = am + r;
            if z.re > max_re + tol {
                continue;
            }
            let rep = Representation {
                alpha: alpha.clone(),
                rho_index: j,
            };
            match entries.iter_mut().find(|e| (e.lambda - z).norm() <= tol) {
                Some(e) => e.reps.push(rep),
                None => entries.push(ResonanceEntry {
                    lambda: z,
                    reps: vec![rep],
                }),
            }
        }
    }
    entries.sort_by(|a, b| cmp_complex(&a.lambda, &b.lambda));
    Ok(entries)
}

/// Resonance entry of `p.lambda` for the problem's own spectra.
pub fn resonance_of<T: Scalar>(
    p: &ProblemData<T>,
    cfg: &SolverConfig,
) -> Result<Option<ResonanceEntry>> {
    let mu = linearization_spectrum(p.x())?;
    let rho = endo_spectrum(&p.a0())?;
    enumerate_resonances(&mu, &rho, p.lambda().to_complex(), cfg.resonance_tol)
}

/// Order at which kernel and dual-kernel computations are carried out: the
/// problem order, raised to the resonance threshold when needed.
fn working_problem<T: Scalar>(
    p: &ProblemData<T>,
    cfg: &SolverConfig,
) -> Result<(ProblemData<T>, Option<ResonanceEntry>)> {
    let res = resonance_of(p, cfg)?;
    let need = res.as_ref().map_or(0, |r| r.max_alpha_degree());
    if need > cfg.max_order {
        return Err(Error::OrderBudget(format!(
            "resonance threshold {need} exceeds the order limit {}",
            cfg.max_order
        )));
    }
    let work = if need > p.order() {
        p.with_order(need)?
    } else {
        p.clone()
    };
    Ok((work, res))
}

/// Kernel of `[D_X + A]_N − λ` as jets, with the rank decision behind it.
#[derive(Clone, Debug)]
pub struct KernelBasis<T> {
    pub basis: Vec<Jet<T>>,
    pub resonance: Option<ResonanceEntry>,
    pub rank: RankReport,
}

impl<T> KernelBasis<T> {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

pub fn kernel_basis<T: Scalar>(p: &ProblemData<T>, cfg: &SolverConfig) -> Result<KernelBasis<T>> {
    let (work, resonance) = working_problem(p, cfg)?;
    let shifted = assemble(&work).shifted(work.lambda());
    let (ns, rank) = linalg::null_space(&shifted, cfg.rank_tol)?;
    let basis = ns
        .column_iter()
        .map(|c| {
            Jet::from_coeffs(
                work.n(),
                work.order(),
                ValueShape::Vector(work.m()),
                c.iter().copied().collect(),
            )
        })
        .collect::<Result<_>>()?;
    Ok(KernelBasis {
        basis,
        resonance,
        rank,
    })
}

/// Finite combination of derivatives of delta distributions at the source,
/// acting on Taylor-normalized coefficients: `T(u) = Σ_α t_α · u_α`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualDistribution<T> {
    n: usize,
    m: usize,
    order: usize,
    coeffs: Vec<T>,
}

impl<T: Scalar> DualDistribution<T> {
    /// `coeffs` uses the jet layout: monomial-major, value index fastest.
    pub fn new(n: usize, m: usize, order: usize, coeffs: Vec<T>) -> Result<Self> {
        let expected = monomial_count(n, order) * m;
        if coeffs.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: coeffs.len(),
                context: "dual distribution coefficients",
            });
        }
        Ok(DualDistribution {
            n,
            m,
            order,
            coeffs,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Covector attached to `α`.
    pub fn covector(&self, alpha: &MultiIndex) -> Vec<T> {
        if alpha.degree() > self.order {
            return vec![T::zero(); self.m];
        }
        let k = MonomialBasis::get(self.n, self.order).rank(alpha.entries());
        self.coeffs[k * self.m..(k + 1) * self.m].to_vec()
    }

    /// `T(u)`; coefficients of `u` above the distribution's order are ignored
    /// and missing ones count as zero.
    pub fn pair(&self, u: &Jet<T>) -> Result<T> {
        if u.shape() != ValueShape::Vector(self.m) || u.n() != self.n {
            return Err(Error::ShapeMismatch(format!(
                "cannot pair a dual distribution on vector:{} with a {} jet",
                self.m,
                u.shape()
            )));
        }
        let len = self.coeffs.len().min(u.coeffs().len());
        Ok(self.coeffs[..len]
            .iter()
            .zip(&u.coeffs()[..len])
            .fold(T::zero(), |acc, (&t, &x)| acc + t * x))
    }

    /// Coefficients `c_α` with `T(u) = Σ_α c_α(D^α u(0))`, i.e. `t_α / α!`.
    pub fn to_delta_form(&self) -> Vec<(MultiIndex, Vec<T>)> {
        let basis = MonomialBasis::get(self.n, self.order);
        basis
            .monomials()
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let f = T::from_real(a.factorial());
                let cv = self.coeffs[k * self.m..(k + 1) * self.m]
                    .iter()
                    .map(|&c| c / f)
                    .collect();
                (a.clone(), cv)
            })
            .collect()
    }

    pub fn to_json(&self) -> Value {
        let basis = MonomialBasis::get(self.n, self.order);
        let terms: Vec<Value> = basis
            .monomials()
            .iter()
            .enumerate()
            .filter_map(|(k, a)| {
                let cv = &self.coeffs[k * self.m..(k + 1) * self.m];
                cv.iter().any(|c| !c.is_zero()).then(|| {
                    json!({
                        "alpha": a.entries(),
                        "covector": cv.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
                    })
                })
            })
            .collect();
        json!({ "order": self.order, "terms": terms })
    }
}

#[derive(Clone, Debug)]
pub struct DualKernelBasis<T> {
    pub basis: Vec<DualDistribution<T>>,
    pub resonance: Option<ResonanceEntry>,
    pub rank: RankReport,
    /// Largest relative component found above the order bound.
    pub max_above_bound: f64,
}

impl<T> DualKernelBasis<T> {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

/// Left null space of `[D_X + A]_N − λ` (under the plain transpose), returned
/// as distributions of order at most the resonance threshold `N'`.
/// Components above `N'` must vanish; this is checked, not assumed.
pub fn dual_kernel_basis<T: Scalar>(
    p: &ProblemData<T>,
    cfg: &SolverConfig,
) -> Result<DualKernelBasis<T>> {
    let (work, resonance) = working_problem(p, cfg)?;
    let bound = resonance.as_ref().map_or(0, |r| r.max_alpha_degree());
    let op = assemble(&work);
    let shifted_t = op.shifted(work.lambda()).transpose();
    let (ns, rank) = linalg::null_space(&shifted_t, cfg.rank_tol)?;
    let m = work.m();
    let keep = monomial_count(work.n(), bound) * m;
    let mut max_above = 0.0f64;
    let mut basis = Vec::with_capacity(ns.ncols());
    for c in ns.column_iter() {
        let norm = c.norm();
        let above = c.rows(keep, c.len() - keep).iter().map(|x| x.modulus()).fold(0.0, f64::max);
        let rel = if norm > 0.0 { above / norm } else { 0.0 };
        max_above = max_above.max(rel);
        if rel > cfg.dual_order_tol {
            return Err(Error::DualOrderViolation { bound, size: rel });
        }
        basis.push(DualDistribution::new(
            work.n(),
            m,
            bound,
            c.rows(0, keep).iter().copied().collect(),
        )?);
    }
    Ok(DualKernelBasis {
        basis,
        resonance,
        rank,
        max_above_bound: max_above,
    })
}

#[derive(Clone, Debug)]
pub struct Solvability<T> {
    pub solvable: bool,
    /// `T_i([v]_N)` for each dual-kernel basis element.
    pub obstructions: Vec<T>,
    /// Normalization used in the decision (coefficient 2-norm of `v`, at least 1e-300).
    pub scale: f64,
}

/// Fredholm test: `v` is in the image iff every dual-kernel element
/// annihilates it.
pub fn solvability_test<T: Scalar>(
    p: &ProblemData<T>,
    cfg: &SolverConfig,
) -> Result<Solvability<T>> {
    let duals = dual_kernel_basis(p, cfg)?;
    solvability_with(&duals.basis, p.v(), cfg)
}

pub(crate) fn solvability_with<T: Scalar>(
    duals: &[DualDistribution<T>],
    v: &Jet<T>,
    cfg: &SolverConfig,
) -> Result<Solvability<T>> {
    let scale = v.norm().max(1e-300);
    let obstructions = duals.iter().map(|t| t.pair(v)).collect::<Result<Vec<_>>>()?;
    let solvable = obstructions
        .iter()
        .all(|o| o.modulus() <= cfg.solvability_tol * scale);
    Ok(Solvability {
        solvable,
        obstructions,
        scale,
    })
}

/// A failure of the linearization condition `μ_j ≠ α·μ` for `|α| ≥ 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SternbergViolation {
    /// Zero-based index into `μ`.
    pub component: usize,
    pub alpha: MultiIndex,
}

/// All `(j, α)` with `|α| ≥ 2` and `|μ_j − α·μ| ≤ tol`.
pub fn sternberg_resonance_check(mu: &[Complex64], tol: f64) -> Result<Vec<SternbergViolation>> {
    let mut out = Vec::new();
    for (j, &mj) in mu.iter().enumerate() {
        let d = search_degree(mu, &[Complex64::new(0.0, 0.0)], mj.re, tol)?;
        if d < 2 {
            continue;
        }
        let basis = MonomialBasis::get(mu.len(), d);
        for alpha in &basis.monomials()[basis.degree_range(2).start..] {
            if (alpha.dot(mu) - mj).norm() <= tol {
                out.push(SternbergViolation {
                    component: j,
                    alpha: alpha.clone(),
                });
            }
        }
    }
    Ok(out)
}

/// Matrix `P_ij = T_i(w_j)` between dual and primal kernel bases.
pub fn pairing_matrix<T: Scalar>(
    duals: &[DualDistribution<T>],
    kernel: &[Jet<T>],
) -> Result<DMatrix<T>> {
    let mut p = DMatrix::zeros(duals.len(), kernel.len());
    for (i, t) in duals.iter().enumerate() {
        for (j, w) in kernel.iter().enumerate() {
            p[(i, j)] = t.pair(w)?;
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn euler_zero_with_positive_shift_is_not_an_eigenvalue() {
        for j in 1..4 {
            let r = enumerate_resonances(&[c(1.0); 3], &[c(j as f64)], c(0.0), 1e-9).unwrap();
            assert!(r.is_none());
        }
        let r = enumerate_resonances(&[c(1.0); 3], &[c(0.0)], c(0.0), 1e-9)
            .unwrap()
            .unwrap();
        assert_eq!(r.multiplicity(), 1);
        assert_eq!(r.reps[0].alpha, MultiIndex::zero(3));
    }

    #[test]
    fn multiplicity_two_at_lambda_two() {
        let r = enumerate_resonances(&[c(1.0), c(2.0)], &[c(0.0)], c(2.0), 1e-9)
            .unwrap()
            .unwrap();
        assert_eq!(r.multiplicity(), 2);
        let alphas: Vec<_> = r.reps.iter().map(|x| x.alpha.entries().to_vec()).collect();
        assert_eq!(alphas, vec![vec![0, 1], vec![2, 0]]);
        assert_eq!(r.max_alpha_degree(), 2);
    }

    #[test]
    fn non_positive_source_rejected() {
        assert!(matches!(
            enumerate_resonances(&[c(1.0), c(-0.5)], &[c(0.0)], c(1.0), 1e-9),
            Err(Error::NotPositiveSource { .. })
        ));
    }

    #[test]
    fn sternberg_examples() {
        let v = sternberg_resonance_check(&[c(1.0), c(2.0)], 1e-9).unwrap();
        assert_eq!(
            v,
            vec![SternbergViolation {
                component: 1,
                alpha: MultiIndex::new(vec![2, 0])
            }]
        );
        assert!(sternberg_resonance_check(&[c(1.0), c(std::f64::consts::PI)], 1e-9)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn spectrum_of_euler_field_in_the_plane() {
        let s = enumerate_spectrum(&[c(1.0), c(1.0)], &[c(0.0)], 2.0, 1e-9).unwrap();
        let mults: Vec<usize> = s.iter().map(|e| e.multiplicity()).collect();
        assert_eq!(mults, [1, 2, 3]);
    }

    #[test]
    fn delta_form_divides_by_factorial() {
        let t = DualDistribution::new(1, 1, 2, vec![0.0, 0.0, 1.0]).unwrap();
        let f = t.to_delta_form();
        assert_eq!(f[2].1, vec![0.5]);
        // T(y^2) = 1 and (1/2)·D²(y²)(0) = 1
        let y2 = Jet::monomial(1, 2, &MultiIndex::new(vec![2]), 1.0);
        let y2v = Jet::from_coeffs(1, 2, ValueShape::Vector(1), y2.coeffs().to_vec()).unwrap();
        assert_eq!(t.pair(&y2v).unwrap(), 1.0);
    }
}
