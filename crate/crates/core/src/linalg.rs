//! Dense linear-algebra helpers: eigenvalues, rank-revealing null spaces,
//! least-norm and LU solves, spectral norms.

use faer::{c64, Mat};
use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{cmp_complex, Field, Scalar};

const EIG_EPS: f64 = 1e-15;
const MAX_ITER: usize = 10_000;

/// Singular values at or below `threshold / AMBIGUITY_BAND`, or above
/// `threshold * AMBIGUITY_BAND`, are considered clearly decided.
pub const AMBIGUITY_BAND: f64 = 100.0;

/// Eigenvalues closer than this (relative to `max(1, ‖M‖)`) are replaced by
/// their cluster mean. A defective eigenvalue of a Jordan block of size `k`
/// splits by about `ε^{1/k}`, while the mean stays accurate to round-off.
pub const EIGEN_CLUSTER_TOL: f64 = 1e-5;

/// Eigenvalues with algebraic multiplicity, sorted by real part then
/// imaginary part. Real matrices go through the real Schur form, so complex
/// conjugate pairs come out exactly conjugate and adjacent. Tight clusters
/// are merged (see [`EIGEN_CLUSTER_TOL`]).
pub fn eigenvalues<T: Scalar>(m: &DMatrix<T>) -> Result<Vec<Complex64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::ShapeMismatch("eigenvalues of a non-square matrix".into()));
    }
    let dim = m.nrows();
    if dim == 0 {
        return Ok(Vec::new());
    }
    if m.iter().any(|x| !x.to_complex().is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let mut ev: Vec<Complex64> = match T::FIELD {
        Field::Real => {
            let r = m.map(|x| x.to_complex().re);
            let schur = Schur::try_new(r, EIG_EPS, MAX_ITER).ok_or(Error::Eigensolver { dim })?;
            schur.complex_eigenvalues().iter().copied().collect()
        }
        Field::Complex => {
            let c = m.map(|x| x.to_complex());
            let schur = Schur::try_new(c, EIG_EPS, MAX_ITER).ok_or(Error::Eigensolver { dim })?;
            schur
                .eigenvalues()
                .ok_or(Error::Eigensolver { dim })?
                .iter()
                .copied()
                .collect()
        }
    };
    let scale = m.iter().map(|x| x.modulus()).fold(1.0, f64::max);
    merge_clusters(&mut ev, EIGEN_CLUSTER_TOL * scale);
    ev.sort_by(cmp_complex);
    Ok(ev)
}

/// Replaces each connected group of values (links shorter than `tol`) by
/// the group mean.
fn merge_clusters(ev: &mut [Complex64], tol: f64) {
    let n = ev.len();
    let mut group: Vec<usize> = (0..n).collect();
    fn root(g: &mut [usize], mut i: usize) -> usize {
        while g[i] != i {
            g[i] = g[g[i]];
            i = g[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if (ev[i] - ev[j]).norm() < tol {
                let (a, b) = (root(&mut group, i), root(&mut group, j));
                group[a.max(b)] = a.min(b);
            }
        }
    }
    for r in 0..n {
        let members: Vec<usize> = (0..n).filter(|&i| root(&mut group, i) == r).collect();
        if members.len() > 1 {
            let mean = members.iter().map(|&i| ev[i]).sum::<Complex64>() / members.len() as f64;
            for i in members {
                ev[i] = mean;
            }
        }
    }
}

/// Outcome of a rank decision.
#[derive(Clone, Debug, Serialize)]
pub struct RankReport {
    /// Singular values in descending order.
    pub singular_values: Vec<f64>,
    pub threshold: f64,
    pub rank: usize,
    pub nullity: usize,
    /// Ratio of the smallest retained singular value to the largest
    /// discarded one (`inf` when one side is empty or the discarded ones are 0).
    pub gap: f64,
}

/// Full SVD `A = U Σ Vᴴ` with descending singular values.
struct Svd<T> {
    singular_values: Vec<f64>,
    u: DMatrix<T>,
    v_t: DMatrix<T>,
}

fn svd<T: Scalar>(m: &DMatrix<T>) -> Result<Svd<T>> {
    let (rows, cols) = m.shape();
    let err = |_| Error::Svd { rows, cols };
    match T::FIELD {
        Field::Real => {
            let a = Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)].to_complex().re);
            let d = a.svd().map_err(err)?;
            let back = |x: f64| T::from_real(x);
            Ok(Svd {
                singular_values: d.S().column_vector().iter().copied().collect(),
                u: DMatrix::from_fn(rows, rows, |i, j| back(d.U()[(i, j)])),
                v_t: DMatrix::from_fn(cols, cols, |i, j| back(d.V()[(j, i)])),
            })
        }
        Field::Complex => {
            let a = Mat::<c64>::from_fn(rows, cols, |i, j| m[(i, j)].to_complex());
            let d = a.svd().map_err(err)?;
            let back = |z: c64| T::from_complex(z).expect("complex scalar field");
            Ok(Svd {
                singular_values: d.S().column_vector().iter().map(|z| z.re).collect(),
                u: DMatrix::from_fn(rows, rows, |i, j| back(d.U()[(i, j)])),
                v_t: DMatrix::from_fn(cols, cols, |i, j| back(d.V()[(j, i)].conj())),
            })
        }
    }
}

fn rank_report(sv: &[f64], rtol: f64, cols: usize) -> Result<RankReport> {
    let smax = sv.first().copied().unwrap_or(0.0);
    let threshold = rtol * smax;
    let rank = if smax == 0.0 {
        0
    } else {
        sv.iter().filter(|&&s| s > threshold).count()
    };
    if smax > 0.0 {
        if let Some(&s) = sv
            .iter()
            .find(|&&s| s > threshold / AMBIGUITY_BAND && s <= threshold * AMBIGUITY_BAND)
        {
            let gap = gap_of(sv, rank);
            return Err(Error::RankAmbiguous {
                sigma: s,
                threshold,
                gap,
            });
        }
    }
    Ok(RankReport {
        singular_values: sv.to_vec(),
        threshold,
        rank,
        nullity: cols - rank,
        gap: gap_of(sv, rank),
    })
}

fn gap_of(sv: &[f64], rank: usize) -> f64 {
    match (rank.checked_sub(1).and_then(|i| sv.get(i)), sv.get(rank)) {
        (Some(&kept), Some(&dropped)) if dropped > 0.0 => kept / dropped,
        _ => f64::INFINITY,
    }
}

/// Orthonormal basis (columns) of the null space of a square or wide matrix,
/// with relative threshold `rtol · σ_max`.
pub fn null_space<T: Scalar>(m: &DMatrix<T>, rtol: f64) -> Result<(DMatrix<T>, RankReport)> {
    let cols = m.ncols();
    if cols == 0 {
        return Ok((
            DMatrix::zeros(0, 0),
            RankReport {
                singular_values: vec![],
                threshold: 0.0,
                rank: 0,
                nullity: 0,
                gap: f64::INFINITY,
            },
        ));
    }
    let dec = svd(m)?;
    let report = rank_report(&dec.singular_values, rtol, cols)?;
    let v_t = &dec.v_t;
    let mut basis = DMatrix::zeros(cols, report.nullity);
    for (k, r) in (report.rank..cols).enumerate() {
        for c in 0..cols {
            basis[(c, k)] = v_t[(r, c)].conjugate();
        }
    }
    Ok((basis, report))
}

/// Singular values (descending) and the rank decision, without vectors.
pub fn rank<T: Scalar>(m: &DMatrix<T>, rtol: f64) -> Result<RankReport> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return rank_report(&[], rtol, m.ncols());
    }
    rank_report(&singular_values(m)?, rtol, m.ncols())
}

/// Minimal-norm least-squares solution `x = A⁺ b` using the same rank policy
/// as [`null_space`]. Returns the solution and `‖A x − b‖₂`.
pub fn least_norm_solve<T: Scalar>(
    a: &DMatrix<T>,
    b: &DVector<T>,
    rtol: f64,
) -> Result<(DVector<T>, f64, RankReport)> {
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.len(),
            context: "least-norm right-hand side",
        });
    }
    if a.ncols() == 0 {
        return Ok((DVector::zeros(0), b.norm(), rank_report(&[], rtol, 0)?));
    }
    let dec = svd(a)?;
    let sv = &dec.singular_values;
    let report = rank_report(sv, rtol, a.ncols())?;
    let (u, v_t) = (&dec.u, &dec.v_t);
    let mut x = DVector::zeros(a.ncols());
    for k in 0..report.rank {
        let coef = u.column(k).dotc(b) / T::from_real(sv[k]);
        for c in 0..a.ncols() {
            x[c] += v_t[(k, c)].conjugate() * coef;
        }
    }
    let res = (a * &x - b).norm();
    Ok((x, res, report))
}

/// Dense LU solve with partial pivoting; also returns the 1-norm condition
/// number `‖A‖₁ ‖A⁻¹‖₁`.
pub fn lu_solve<T: Scalar>(a: &DMatrix<T>, b: &DVector<T>) -> Option<(DVector<T>, f64)> {
    if a.nrows() == 0 {
        return Some((DVector::zeros(0), 1.0));
    }
    let lu = a.clone().lu();
    let x = lu.solve(b)?;
    let inv = lu.try_inverse()?;
    let cond = norm1(a) * norm1(&inv);
    if !cond.is_finite() {
        return None;
    }
    Some((x, cond))
}

/// Maximum absolute column sum.
pub fn norm1<T: Scalar>(a: &DMatrix<T>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Operator 2-norm (largest singular value).
pub fn spectral_norm<T: Scalar>(a: &DMatrix<T>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    singular_values(a).map_or(f64::NAN, |s| s[0])
}

/// Singular values in descending order.
pub fn singular_values<T: Scalar>(m: &DMatrix<T>) -> Result<Vec<f64>> {
    let (rows, cols) = m.shape();
    let err = |_| Error::Svd { rows, cols };
    match T::FIELD {
        Field::Real => Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)].to_complex().re)
            .singular_values()
            .map_err(err),
        Field::Complex => Mat::<c64>::from_fn(rows, cols, |i, j| m[(i, j)].to_complex())
            .singular_values()
            .map_err(err),
    }
}

/// Matrix exponential (scaling and squaring with a Padé approximant).
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjugate_pairs_are_exact_and_adjacent() {
        let m = DMatrix::from_row_slice(3, 3, &[0.0, -2.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let ev = eigenvalues(&m).unwrap();
        assert_eq!(ev.len(), 3);
        assert_eq!(ev[0], ev[1].conj());
        assert!((ev[2].re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn triangular_spectrum_is_the_diagonal() {
        let m = DMatrix::from_row_slice(3, 3, &[3.0, 1.0, 7.0, 0.0, 1.0, -2.0, 0.0, 0.0, 2.0]);
        let ev: Vec<f64> = eigenvalues(&m).unwrap().iter().map(|z| z.re).collect();
        for (a, b) in ev.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn null_space_of_rank_one() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (ns, rep) = null_space(&m, 1e-10).unwrap();
        assert_eq!(rep.nullity, 1);
        assert!((&m * &ns).norm() < 1e-14);
        assert!(rep.gap > 1e10);
    }

    #[test]
    fn null_space_of_zero_and_wide() {
        let z = DMatrix::<f64>::zeros(3, 3);
        assert_eq!(null_space(&z, 1e-10).unwrap().1.nullity, 3);
        let w = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]);
        let (ns, rep) = null_space(&w, 1e-10).unwrap();
        assert_eq!(rep.nullity, 2);
        assert!((&w * &ns).norm() < 1e-14);
    }

    #[test]
    fn ambiguous_rank_is_reported() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-10]));
        assert!(matches!(
            null_space(&m, 1e-10),
            Err(Error::RankAmbiguous { .. })
        ));
    }

    #[test]
    fn least_norm_picks_minimal_solution() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0]);
        let (x, res, _) = least_norm_solve(&a, &b, 1e-10).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
        assert!(res < 1e-14);
    }

    #[test]
    fn spectral_norm_of_jordan_block() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((spectral_norm(&a) - golden).abs() < 1e-14);
    }
}

