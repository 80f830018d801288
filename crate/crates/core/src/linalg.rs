//! Small dense linear-algebra helpers shared by the estimators.
//!
//! General matrix work uses nalgebra. The Hermitian eigendecomposition behind
//! the PSD projection is the hot loop of the SDP solver and goes through faer.

use faer::Mat;
use nalgebra::linalg::Cholesky;

use crate::error::{numerical, Result};
use crate::{CMat, C64};

/// Euclidean norm of every row.
pub fn row_norms(m: &CMat) -> Vec<f64> {
    // column-major storage: accumulate column by column
    let mut sq = vec![0.0; m.nrows()];
    if m.nrows() > 0 {
        for col in m.as_slice().chunks_exact(m.nrows()) {
            for (s, z) in sq.iter_mut().zip(col) {
                *s += z.norm_sqr();
            }
        }
    }
    sq.into_iter().map(f64::sqrt).collect()
}

/// `(A + A*) / 2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Real trace.
pub fn trace_re(m: &CMat) -> f64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)].re).sum()
}

/// `Re tr(A* B)`, the real inner product on complex matrices.
pub fn inner_re(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Singular values in nonincreasing order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Eigendecomposition of a Hermitian matrix: eigenvalues ascending and the
/// matching orthonormal eigenvectors as columns.
pub fn hermitian_eig(m: &CMat) -> Result<(Vec<f64>, CMat)> {
    let n = m.nrows();
    let a = to_faer(m);
    let evd = a
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| numerical(format!("hermitian eigendecomposition failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let values = (0..n).map(|i| s[i].re).collect();
    Ok((values, from_faer(evd.U())))
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &CMat) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let a = to_faer(m);
    let vals = a
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| numerical(format!("hermitian eigenvalues failed: {e:?}")))?;
    Ok(vals.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Frobenius-nearest positive semidefinite matrix to the Hermitian part of `m`.
///
/// Rebuilds from whichever eigenvalue group (positive or negative) is smaller,
/// so low-rank iterates are cheap to reassemble.
pub fn project_psd(m: &CMat) -> Result<CMat> {
    let n = m.nrows();
    let herm = hermitian_part(m);
    let a = to_faer(&herm);
    let evd = a
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| numerical(format!("PSD projection eigendecomposition failed: {e:?}")))?;
    let u = evd.U();
    let s = evd.S().column_vector();
    let values: Vec<f64> = (0..n).map(|i| s[i].re).collect();
    let n_neg = values.iter().take_while(|v| **v < 0.0).count();
    if n_neg == 0 {
        return Ok(herm);
    }
    if n_neg == n {
        return Ok(CMat::zeros(n, n));
    }
    // eigenvalues ascending: negatives occupy the first n_neg columns
    let (cols, sign): (Vec<usize>, f64) = if n_neg <= n - n_neg {
        ((0..n_neg).collect(), -1.0)
    } else {
        ((n_neg..n).collect(), 1.0)
    };
    let r = cols.len();
    let scaled = Mat::<faer::c64>::from_fn(n, r, |i, j| u[(i, cols[j])] * values[cols[j]]);
    let basis = Mat::<faer::c64>::from_fn(n, r, |i, j| u[(i, cols[j])]);
    let low_rank = &scaled * basis.adjoint();
    let part = from_faer(low_rank.as_ref());
    let out = if sign > 0.0 { part } else { herm + part.scale(-1.0) };
    Ok(hermitian_part(&out))
}

/// Solves `A X = B` for Hermitian positive definite `A`.
pub fn solve_hpd(a: &CMat, b: &CMat) -> Result<CMat> {
    let chol = Cholesky::new(a.clone())
        .ok_or_else(|| numerical("matrix is not Hermitian positive definite"))?;
    Ok(chol.solve(b))
}

/// Moore-Penrose pseudo-inverse of a full-column-rank matrix.
///
/// Singular values below `rel_tol * sigma_max` count as rank deficiency and
/// are reported as an error instead of being silently dropped.
pub fn pinv_full_column_rank(m: &CMat, rel_tol: f64) -> Result<CMat> {
    if m.ncols() == 0 || m.nrows() < m.ncols() {
        return Err(numerical(format!(
            "{}x{} matrix cannot have full column rank",
            m.nrows(),
            m.ncols()
        )));
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= rel_tol * smax {
        return Err(numerical(format!(
            "rank deficient matrix (sigma_min / sigma_max = {:.3e})",
            if smax > 0.0 { smin / smax } else { 0.0 }
        )));
    }
    svd.pseudo_inverse(rel_tol * smax)
        .map_err(|e| numerical(format!("pseudo-inverse failed: {e}")))
}

fn to_faer(m: &CMat) -> Mat<faer::c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
        let z = m[(i, j)];
        faer::c64::new(z.re, z.im)
    })
}

fn from_faer(m: faer::MatRef<'_, faer::c64>) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| {
        let z = m[(i, j)];
        C64::new(z.re, z.im)
    })
}
