//! Proximal operators and norm evaluators used by the decomposers.
//!
//! * [`prox_row_l21`], [`prox_fro`], [`prox_nuclear`]: closed forms;
//! * [`sdp`]: atomic-norm prox and norm through the Toeplitz-constrained SDP;
//! * [`grid`]: gridded atomic norm (group lasso over an FFT dictionary) and the
//!   dual-norm oracles.

pub mod grid;
pub mod sdp;

pub use grid::{dual_atomic_norm, dual_atomic_norm_bound, gridded_atomic_norm, gridded_dual_norm, prox_atomic_grid, GridOperator, GridProx};
pub use sdp::{atomic_norm_sdp, prox_atomic_sdp, NormEstimate, SdpProx, SdpState};

use crate::error::{invalid, numerical, Result};
use crate::linalg::row_norms;
use crate::{CMat, C64};

/// Step weight, iteration cap and relative residual tolerances of an ADMM
/// or proximal-gradient loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmControls {
    pub penalty: f64,
    pub max_iters: usize,
    pub tol_primal: f64,
    pub tol_dual: f64,
}

impl AdmmControls {
    pub fn new(penalty: f64, max_iters: usize, tol: f64) -> Self {
        AdmmControls { penalty, max_iters, tol_primal: tol, tol_dual: tol }
    }

    /// Defaults for the SDP inner solver.
    pub fn sdp_default() -> Self {
        AdmmControls::new(1.0, 200, 1e-5)
    }

    /// Defaults for the grid solvers.
    pub fn grid_default() -> Self {
        AdmmControls::new(1.0, 500, 1e-5)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.penalty > 0.0 && self.penalty.is_finite()) {
            return Err(invalid(format!("penalty = {} must be positive", self.penalty)));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be at least 1"));
        }
        if !(self.tol_primal >= 0.0 && self.tol_dual >= 0.0) {
            return Err(invalid("tolerances must be nonnegative"));
        }
        Ok(())
    }
}

impl Default for AdmmControls {
    fn default() -> Self {
        AdmmControls::sdp_default()
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if t >= 0.0 && !t.is_nan() {
        Ok(())
    } else {
        Err(invalid(format!("threshold {t} must be nonnegative")))
    }
}

/// Row-wise group shrinkage: each row scaled by `(1 - t / ||row||)_+`.
///
/// `t = +inf` zeroes every row.
pub fn prox_row_l21(v: &CMat, t: f64) -> Result<CMat> {
    check_threshold(t)?;
    let mut out = v.clone();
    shrink_rows_in_place(&mut out, t);
    Ok(out)
}

pub(crate) fn shrink_rows_in_place(v: &mut CMat, t: f64) {
    if t == 0.0 {
        return;
    }
    let rows = v.nrows();
    if rows == 0 {
        return;
    }
    let scales: Vec<f64> = row_norms(v).into_iter().map(|n| if n > t { 1.0 - t / n } else { 0.0 }).collect();
    for col in v.as_mut_slice().chunks_exact_mut(rows) {
        for (z, s) in col.iter_mut().zip(&scales) {
            *z *= *s;
        }
    }
}

/// `argmin_N 1/2 ||N||^2 + 1/2 ||N - V||^2 = V / 2`.
pub fn prox_fro(v: &CMat) -> CMat {
    v.scale(0.5)
}

/// Singular value soft-thresholding.
pub fn prox_nuclear(v: &CMat, t: f64) -> Result<CMat> {
    check_threshold(t)?;
    if t == 0.0 || v.is_empty() {
        return Ok(v.clone());
    }
    let svd = v.clone().try_svd(true, true, f64::EPSILON, 0).ok_or_else(|| numerical("SVD did not converge"))?;
    let u = svd.u.ok_or_else(|| numerical("SVD returned no U"))?;
    let vt = svd.v_t.ok_or_else(|| numerical("SVD returned no V*"))?;
    let mut out = CMat::zeros(v.nrows(), v.ncols());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        let shrunk = s - t;
        if shrunk > 0.0 {
            out += (u.column(i) * vt.row(i)).scale(shrunk);
        }
    }
    Ok(out)
}

pub(crate) fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}
