//! Order-by-order jet solutions of `(D_X + A − λ)u = v`.
//!
//! The equation is first solved on `P_{N*}`, where `N*` is the largest `|α|`
//! among the representations of `λ` (zero when `λ` is not an eigenvalue).
//! Above `N*` every slice operator `D_0 + A(0) − λ` on `H_k ⊗ V` is
//! invertible, so the remaining homogeneous parts follow uniquely one degree
//! at a time. The same recursion with `v = 0` extends each kernel element.
//!
//! Jets are the solver's notion of a solution: a flat correction (a function
//! with vanishing Taylor series) is invisible at every finite order and is
//! not represented. No convergence of the Taylor series is claimed. Functions
//! of finite regularity, such as `C¹` eigenfunctions of non-linearizable
//! fields, are out of reach of jet methods altogether.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::jet::{Jet, ValueShape};
use crate::linalg::{self, RankReport};
use crate::operator::{apply_degree, apply_via_jets, assemble, assemble_slice};
use crate::problem::ProblemData;
use crate::scalar::Scalar;
use crate::spectral::{
    self, dual_kernel_basis, endo_spectrum, linearization_spectrum, near_resonances,
    NearResonance, ResonanceEntry,
};

#[derive(Clone, Debug, Default)]
pub struct ConditionReport {
    /// `(degree, 1-norm condition number)` of each slice solve.
    pub slice_conditions: Vec<(usize, f64)>,
    pub max_condition: f64,
    pub head_order: usize,
    pub head_rank: Option<RankReport>,
    pub near_resonances: Vec<NearResonance>,
    pub warnings: Vec<String>,
}

impl ConditionReport {
    pub fn to_json(&self) -> Value {
        json!({
            "head_order": self.head_order,
            "max_condition": self.max_condition,
            "slice_conditions": self.slice_conditions.iter()
                .map(|(k, c)| json!({ "degree": k, "condition": c }))
                .collect::<Vec<_>>(),
            "head_singular_values": self.head_rank.as_ref().map(|r| r.singular_values.clone()),
            "near_resonances": self.near_resonances.iter().map(|r| json!({
                "alpha": r.alpha.entries(),
                "rho_index": r.rho_index,
                "distance": r.distance,
            })).collect::<Vec<_>>(),
            "warnings": self.warnings,
        })
    }
}

#[derive(Clone, Debug)]
pub struct JetSolution<T> {
    /// Minimal-norm-head particular solution; `None` when unsolvable.
    pub particular: Option<Jet<T>>,
    /// Extensions of a kernel basis to the requested order.
    pub kernel: Vec<Jet<T>>,
    pub resonance: Option<ResonanceEntry>,
    /// Dual obstructions `T_i([v])`; all within tolerance iff solvable.
    pub obstructions: Vec<T>,
    pub solvable: bool,
    pub order: usize,
    pub condition: ConditionReport,
}

/// Solves to order `order` (raised to the resonance threshold if needed).
pub fn solve_to_order<T: Scalar>(
    p: &ProblemData<T>,
    order: usize,
    cfg: &SolverConfig,
) -> Result<JetSolution<T>> {
    let mu = linearization_spectrum(p.x())?;
    let rho = endo_spectrum(&p.a0())?;
    let lambda = p.lambda().to_complex();
    let resonance = spectral::enumerate_resonances(&mu, &rho, lambda, cfg.resonance_tol)?;
    let near = near_resonances(&mu, &rho, lambda, cfg.resonance_tol, cfg.near_resonance_tol)?;
    let n_star = resonance.as_ref().map_or(0, |r| r.max_alpha_degree());
    let head_order = n_star.max(1);
    let order = order.max(head_order);
    if order > cfg.max_order {
        return Err(Error::OrderBudget(format!(
            "requested order {order} exceeds the limit {}",
            cfg.max_order
        )));
    }
    let work = p.with_order(order)?;
    let head = work.with_order(head_order)?;

    let mut report = ConditionReport {
        head_order,
        near_resonances: near,
        ..ConditionReport::default()
    };
    for r in &report.near_resonances {
        report.warnings.push(format!(
            "near resonance: alpha {:?}, rho index {}, distance {:e}",
            r.alpha.entries(),
            r.rho_index,
            r.distance
        ));
    }

    // Head: projected equation on P_{N*}.
    let duals = dual_kernel_basis(&head, cfg)?;
    let solv = spectral::solvability_with(&duals.basis, head.v(), cfg)?;
    let shifted = assemble(&head).shifted(head.lambda());
    let kernel_head = spectral::kernel_basis(&head, cfg)?;

    let particular = if solv.solvable {
        let b = DVector::from_column_slice(head.v().coeffs());
        let (x, _res, rank) = linalg::least_norm_solve(&shifted, &b, cfg.rank_tol)?;
        report.head_rank = Some(rank);
        let u_head = Jet::from_coeffs(
            head.n(),
            head_order,
            ValueShape::Vector(head.m()),
            x.as_slice().to_vec(),
        )?;
        Some(extend(&work, u_head, true, &mut report, cfg)?)
    } else {
        None
    };

    let mut kernel = Vec::with_capacity(kernel_head.dim());
    let extended: Vec<Result<(Jet<T>, ConditionReport)>> = kernel_head
        .basis
        .into_par_iter()
        .map(|w| {
            let mut rep = ConditionReport::default();
            let e = extend(&work, w, false, &mut rep, cfg)?;
            Ok((e, rep))
        })
        .collect();
    for r in extended {
        let (w, rep) = r?;
        if report.slice_conditions.is_empty() {
            report.slice_conditions = rep.slice_conditions;
            report.max_condition = rep.max_condition;
        }
        kernel.push(w);
    }

    Ok(JetSolution {
        particular,
        kernel,
        resonance,
        obstructions: solv.obstructions,
        solvable: solv.solvable,
        order,
        condition: report,
    })
}

/// Extends a solution on `P_h` to the working order by slice solves.
fn extend<T: Scalar>(
    work: &ProblemData<T>,
    head: Jet<T>,
    with_v: bool,
    report: &mut ConditionReport,
    cfg: &SolverConfig,
) -> Result<Jet<T>> {
    let h = head.order();
    let mut u = head.to_order(work.order());
    let lambda = work.lambda();
    for k in h + 1..=work.order() {
        let mut rhs: Vec<T> = apply_degree(work, &u, k);
        if with_v {
            for (r, &v) in rhs.iter_mut().zip(work.v().slice_coeffs(k)) {
                *r -= v;
            }
        }
        let rhs = DVector::from_iterator(rhs.len(), rhs.into_iter().map(|r| -r));
        let mut s: DMatrix<T> = assemble_slice(work, k);
        for i in 0..s.nrows() {
            s[(i, i)] -= lambda;
        }
        let (x, cond) = linalg::lu_solve(&s, &rhs).ok_or(Error::SingularSlice { degree: k })?;
        if cond > cfg.condition_warn {
            report.warnings.push(format!(
                "slice at degree {k} is ill-conditioned (condition {cond:e})"
            ));
        }
        report.slice_conditions.push((k, cond));
        report.max_condition = report.max_condition.max(cond);
        u.slice_coeffs_mut(k).copy_from_slice(x.as_slice());
    }
    Ok(u)
}

/// `(D_X + A − λ)u − v`, at the smaller of the two orders.
pub fn residual<T: Scalar>(p: &ProblemData<T>, u: &Jet<T>) -> Result<Jet<T>> {
    let order = p.order().min(u.order());
    let q = if order == p.order() {
        p.clone()
    } else {
        p.with_order(order)?
    };
    let u = u.project(order)?;
    apply_via_jets(&q, &u)?.sub(&u.scale(q.lambda()))?.sub(q.v())
}

impl<T: Scalar> JetSolution<T> {
    pub fn to_json(&self) -> Value {
        json!({
            "order": self.order,
            "solvable": self.solvable,
            "particular": self.particular.as_ref().map(crate::codec::jet_to_json),
            "kernel": self.kernel.iter().map(crate::codec::jet_to_json).collect::<Vec<_>>(),
            "obstructions": self.obstructions.iter().map(|o| o.to_json()).collect::<Vec<_>>(),
            "resonance": self.resonance.as_ref().map(|r| r.to_json()),
            "condition_report": self.condition.to_json(),
        })
    }
}
