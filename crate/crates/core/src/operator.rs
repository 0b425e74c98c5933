//! Matrices of `[D_X + A]_N` on `P_N ⊗ V` and of `D_0 + A(0)` on the
//! homogeneous slices `H_k ⊗ V`.
//!
//! Basis vectors are `y^α e_j`, ordered graded-lex in `α` with the value
//! index `j` running fastest. Since `X(0) = 0`, the operator maps degree `k`
//! into degrees `≥ k`, so the matrix is block lower-triangular with respect
//! to the grading and its diagonal blocks are the slice matrices.

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::jet::{Jet, MultiIndex, MonomialBasis, ValueShape};
use crate::problem::ProblemData;
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct OperatorMatrix<T> {
    n: usize,
    m: usize,
    order: usize,
    entries: DMatrix<T>,
    /// Row offsets of each degree block, `order + 2` entries.
    grading: Vec<usize>,
    transposed: bool,
}

/// Calls `f(target_rank, row_value_index, coefficient)` for every nonzero
/// contribution of `(D_X + A)(y^α e_j)`, restricted to target degree
/// `only_degree` when given.
fn for_each_image<T: Scalar>(
    p: &ProblemData<T>,
    alpha: &MultiIndex,
    j: usize,
    only_degree: Option<usize>,
    mut f: impl FnMut(usize, usize, T),
) {
    let n = p.n();
    let m = p.m();
    let order = p.order();
    let basis = p.a().basis();
    let mons = basis.monomials();
    let deg = alpha.degree();
    let mut exps = vec![0u32; n];
    let wanted = |d: usize| d <= order && only_degree.map_or(true, |k| k == d);

    // D_X (y^α e_j) = Σ_i α_i y^{α − e_i} X^i e_j
    for (i, xi) in p.x().components().iter().enumerate() {
        let ai = alpha.entries()[i];
        if ai == 0 {
            continue;
        }
        let scale = T::from_real(f64::from(ai));
        for e in 1..=order {
            let target = deg - 1 + e;
            if !wanted(target) {
                continue;
            }
            for k in basis.degree_range(e) {
                let c = xi.coeffs()[k];
                if c.is_zero() {
                    continue;
                }
                for (t, (a, b)) in exps.iter_mut().zip(alpha.entries().iter().zip(mons[k].entries())) {
                    *t = a + b;
                }
                exps[i] -= 1;
                f(basis.rank(&exps), j, c * scale);
            }
        }
    }
    // A y^α e_j = Σ_γ y^{α+γ} A_γ e_j
    for e in 0..=order {
        let target = deg + e;
        if !wanted(target) {
            continue;
        }
        for k in basis.degree_range(e) {
            let blk = p.a().block(k);
            for (t, (a, b)) in exps.iter_mut().zip(alpha.entries().iter().zip(mons[k].entries())) {
                *t = a + b;
            }
            let mut rank = None;
            for r in 0..m {
                let c = blk[r * m + j];
                if !c.is_zero() {
                    let rk = *rank.get_or_insert_with(|| basis.rank(&exps));
                    f(rk, r, c);
                }
            }
        }
    }
}

/// Matrix of `[D_X + A]_N` (without the `−λ` shift).
pub fn assemble<T: Scalar>(p: &ProblemData<T>) -> OperatorMatrix<T> {
    let m = p.m();
    let basis = MonomialBasis::get(p.n(), p.order());
    let dim = basis.len() * m;
    let mut entries = DMatrix::zeros(dim, dim);
    for (ka, alpha) in basis.monomials().iter().enumerate() {
        for j in 0..m {
            let col = ka * m + j;
            for_each_image(p, alpha, j, None, |kt, r, c| {
                entries[(kt * m + r, col)] += c;
            });
        }
    }
    OperatorMatrix {
        n: p.n(),
        m,
        order: p.order(),
        entries,
        grading: grading(&basis, m),
        transposed: false,
    }
}

fn grading(basis: &MonomialBasis, m: usize) -> Vec<usize> {
    let mut g: Vec<usize> = (0..=basis.order())
        .map(|d| basis.degree_range(d).start * m)
        .collect();
    g.push(basis.len() * m);
    g
}

/// Matrix of `D_0 + A(0)` on `H_k ⊗ V`, where `D_0` is the linear part of
/// `X`. Built directly from the linearization, independently of [`assemble`].
pub fn assemble_slice<T: Scalar>(p: &ProblemData<T>, k: usize) -> DMatrix<T> {
    let n = p.n();
    let m = p.m();
    let basis = MonomialBasis::get(n, k);
    let range = basis.degree_range(k);
    let off = range.start;
    let dim = range.len() * m;
    let lin = p.x().linearization();
    let a0 = p.a0();
    let mut s = DMatrix::zeros(dim, dim);
    let mut exps = vec![0u32; n];
    for ka in range.clone() {
        let alpha = &basis.monomials()[ka];
        for j in 0..m {
            let col = (ka - off) * m + j;
            // D_0 y^α = Σ_i α_i y^{α − e_i} Σ_l L_il y_l
            for i in 0..n {
                let ai = alpha.entries()[i];
                if ai == 0 {
                    continue;
                }
                for l in 0..n {
                    let c = lin[(i, l)];
                    if c.is_zero() {
                        continue;
                    }
                    exps.copy_from_slice(alpha.entries());
                    exps[i] -= 1;
                    exps[l] += 1;
                    let row = (basis.rank(&exps) - off) * m + j;
                    s[(row, col)] += c * T::from_real(f64::from(ai));
                }
            }
            for r in 0..m {
                s[((ka - off) * m + r, col)] += a0[(r, j)];
            }
        }
    }
    s
}

/// Degree-`k` homogeneous part of `(D_X + A)u`, as slice coefficients.
pub fn apply_degree<T: Scalar>(p: &ProblemData<T>, u: &Jet<T>, k: usize) -> Vec<T> {
    let m = p.m();
    let basis = u.basis();
    let range = MonomialBasis::get(p.n(), p.order()).degree_range(k);
    let off = range.start;
    let mut out = vec![T::zero(); range.len() * m];
    for ka in basis.degree_range(0).start..basis.degree_range(k.min(u.order())).end {
        let blk = u.block(ka);
        if blk.iter().all(|c| c.is_zero()) {
            continue;
        }
        let alpha = &basis.monomials()[ka];
        for (j, &uj) in blk.iter().enumerate() {
            if uj.is_zero() {
                continue;
            }
            for_each_image(p, alpha, j, Some(k), |kt, r, c| {
                out[(kt - off) * m + r] += c * uj;
            });
        }
    }
    out
}

/// `(D_X + A)u` computed with jet arithmetic alone.
pub fn apply_via_jets<T: Scalar>(p: &ProblemData<T>, u: &Jet<T>) -> Result<Jet<T>> {
    let dxu = p.x().apply(u)?;
    let au = p.a().mul(u)?;
    dxu.add(&au)
}

impl<T: Scalar> OperatorMatrix<T> {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn entries(&self) -> &DMatrix<T> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<T> {
        self.entries
    }

    /// Row/column offsets of the degree blocks (`order + 2` entries).
    pub fn grading(&self) -> &[usize] {
        &self.grading
    }

    pub fn is_adjoint(&self) -> bool {
        self.transposed
    }

    /// `M − λ·id`.
    pub fn shifted(&self, lambda: T) -> DMatrix<T> {
        let mut s = self.entries.clone();
        for i in 0..s.nrows() {
            s[(i, i)] -= lambda;
        }
        s
    }

    /// Ordered basis labels `(α, j)`.
    pub fn basis(&self) -> Vec<(MultiIndex, usize)> {
        let b = MonomialBasis::get(self.n, self.order);
        b.monomials()
            .iter()
            .flat_map(|a| (0..self.m).map(move |j| (a.clone(), j)))
            .collect()
    }

    pub fn basis_labels(&self) -> Vec<String> {
        self.basis()
            .iter()
            .map(|(a, j)| format!("{}*e{j}", a.label()))
            .collect()
    }

    /// Diagonal block on degree `k`.
    pub fn diagonal_block(&self, k: usize) -> DMatrix<T> {
        let (s, e) = (self.grading[k], self.grading[k + 1]);
        self.entries.view((s, s), (e - s, e - s)).into_owned()
    }

    /// Largest entry mapping a degree-`k` basis vector to a degree below `k`
    /// (above the diagonal blocks for the transpose). Zero for every
    /// operator with `X(0) = 0`.
    pub fn off_grading_max(&self) -> f64 {
        let mut worst = 0.0f64;
        for d in 0..=self.order {
            let (s, e) = (self.grading[d], self.grading[d + 1]);
            for col in s..e {
                for row in 0..s {
                    let (r, c) = if self.transposed { (col, row) } else { (row, col) };
                    worst = worst.max(self.entries[(r, c)].modulus());
                }
            }
        }
        worst
    }

    pub fn is_block_lower_triangular(&self) -> bool {
        !self.transposed && self.off_grading_max() == 0.0
    }

    /// Matrix of the dual map in the pairing `⟨T, u⟩ = Σ t_i u_i`: the plain
    /// transpose, so `⟨Mᵀ T, u⟩ = ⟨T, M u⟩`.
    pub fn adjoint(&self) -> OperatorMatrix<T> {
        OperatorMatrix {
            n: self.n,
            m: self.m,
            order: self.order,
            entries: self.entries.transpose(),
            grading: self.grading.clone(),
            transposed: !self.transposed,
        }
    }

    pub fn apply(&self, u: &Jet<T>) -> Result<Jet<T>> {
        if u.coeffs().len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: u.coeffs().len(),
                context: "operator matrix input",
            });
        }
        let x = DVector::from_column_slice(u.coeffs());
        let y = &self.entries * x;
        Jet::from_coeffs(self.n, self.order, ValueShape::Vector(self.m), y.as_slice().to_vec())
    }

    pub fn to_json(&self) -> Value {
        let entries: Vec<Value> = self
            .entries
            .row_iter()
            .flat_map(|r| r.iter().map(|x| x.to_json()).collect::<Vec<_>>())
            .collect();
        json!({
            "dim": self.dim(),
            "basis": self.basis_labels(),
            "entries": entries,
        })
    }

    /// Row-major CSV with a header of basis labels.
    pub fn to_csv(&self) -> String {
        let mut out = self.basis_labels().join(",");
        out.push('\n');
        for r in self.entries.row_iter() {
            let cells: Vec<String> = r.iter().map(|x| format_scalar(*x)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

pub(crate) fn format_scalar<T: Scalar>(x: T) -> String {
    let z = x.to_complex();
    match T::FIELD {
        crate::scalar::Field::Real => format!("{}", z.re),
        crate::scalar::Field::Complex => {
            if z.im >= 0.0 {
                format!("{}+{}i", z.re, z.im)
            } else {
                format!("{}{}i", z.re, z.im)
            }
        }
    }
}
