//! Classical channel estimators: LS, scaled LS and subspace MMSE.

use crate::error::{invalid, numerical, Result};
use crate::linalg::solve_hpd;
use crate::CMat;

/// Relative singular-value cutoff below which `A` counts as rank deficient.
const RANK_TOL: f64 = 1e-10;

fn check_pair(y: &CMat, x: &CMat) -> Result<()> {
    if y.ncols() != x.ncols() {
        return Err(invalid(format!(
            "Y has {} columns but X has {}",
            y.ncols(),
            x.ncols()
        )));
    }
    Ok(())
}

/// `Y X* (X X*)^{-1}`.
pub fn estimate_ls(y: &CMat, x: &CMat) -> Result<CMat> {
    check_pair(y, x)?;
    let gram = x * x.adjoint();
    // (X X*)^{-1} X Y* is the adjoint of the estimate
    let rhs = x * y.adjoint();
    let sol = solve_hpd(&gram, &rhs).map_err(|_| numerical("X X* is singular"))?;
    Ok(sol.adjoint())
}

/// Scaled LS: `K tr(YY*) / (P (sigma2 K M + tr(YY*))) * Y X*` with `P = ||X||_F^2`.
pub fn estimate_ls_sls(y: &CMat, x: &CMat, sigma2: f64) -> Result<CMat> {
    check_pair(y, x)?;
    if !(sigma2 >= 0.0) {
        return Err(invalid("sigma2 must be nonnegative"));
    }
    let (m, k) = (y.nrows() as f64, x.nrows() as f64);
    let power = x.norm_squared();
    if !(power > 0.0) {
        return Err(numerical("pilot has zero power"));
    }
    let tr = y.norm_squared();
    if tr == 0.0 {
        return Ok(CMat::zeros(y.nrows(), x.nrows()));
    }
    let scale = k * tr / (power * (sigma2 * k * m + tr));
    Ok((y * x.adjoint()).scale(scale))
}

/// Orthogonal projector `A (A*A)^{-1} A*` onto the column space of `A`,
/// built from the left singular vectors.
pub fn steering_projector(a: &CMat) -> Result<CMat> {
    let p = a.ncols();
    if p == 0 || a.nrows() < p {
        return Err(numerical("steering matrix cannot have full column rank"));
    }
    let svd = a.clone().svd(true, false);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) || svd.singular_values.min() <= RANK_TOL * smax {
        return Err(numerical("steering matrix is rank deficient"));
    }
    let u = svd.u.ok_or_else(|| numerical("SVD returned no U"))?;
    let basis = u.columns(0, p);
    Ok(basis * basis.adjoint())
}

/// `(K / P) A (A*A)^{-1} A* Y X*` with `P = ||X||_F^2`.
pub fn estimate_mmse(y: &CMat, x: &CMat, a: &CMat) -> Result<CMat> {
    check_pair(y, x)?;
    if a.nrows() != y.nrows() {
        return Err(invalid(format!("A has {} rows, Y has {}", a.nrows(), y.nrows())));
    }
    let power = x.norm_squared();
    if !(power > 0.0) {
        return Err(numerical("pilot has zero power"));
    }
    let k = x.nrows() as f64;
    let pi = steering_projector(a)?;
    Ok((pi * y * x.adjoint()).scale(k / power))
}
