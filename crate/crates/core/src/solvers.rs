//! Three-block exchange ADMM splitting `Z = H + W + N`.
//!
//! ```text
//! minimize tau1 ||H||_c + tau2 ||W||_{2,1} + 1/2 ||N||_F^2   s.t.  H + W + N = Z
//! ```
//!
//! with `||.||_c` the atomic norm (exAD), the gridded atomic norm (fsAD) or the
//! nuclear norm (stPCP). The regularizers are `tau1 = alpha ||Z||_2` and
//! `tau2 = beta ||Z||_{2,inf}`.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Result};
use crate::linalg::row_norms;
use crate::metrics::{nuclear_norm, row_l21_norm, row_linf_norm, spectral_norm};
use crate::model::Observation;
use crate::prox::{prox_atomic_grid, prox_atomic_sdp, prox_nuclear, prox_row_l21, AdmmControls, GridOperator, SdpState};
use crate::CMat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    ExAd,
    FsAd,
    StPcp,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::ExAd, Method::FsAd, Method::StPcp];

    pub fn name(self) -> &'static str {
        match self {
            Method::ExAd => "exAD",
            Method::FsAd => "fsAD",
            Method::StPcp => "stPCP",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exad" => Ok(Method::ExAd),
            "fsad" => Ok(Method::FsAd),
            "stpcp" => Ok(Method::StPcp),
            _ => Err(invalid(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    pub method: Method,
    /// `tau1 = alpha ||Z||_2`.
    pub alpha: f64,
    /// `tau2 = beta ||Z||_{2,inf}`; `+inf` forces `W = 0`.
    pub beta: f64,
    /// fsAD grid size; `None` means `M K`.
    pub grid_n: Option<usize>,
    /// Outer exchange loop. `penalty` scales every prox step.
    pub outer: AdmmControls,
    /// Inner SDP / FISTA loop, warm-started across outer iterations.
    pub inner: AdmmControls,
    /// Rows whose norm exceeds this fraction of the largest row are flagged.
    pub support_threshold_rel: f64,
    /// Optional absolute flagging floor in units of `sqrt(K)` decorrelated
    /// noise standard deviations, compared with the shrunken rows of `W`.
    pub support_floor_sigmas: f64,
}

impl SolverParams {
    pub fn new(method: Method, alpha: f64, beta: f64) -> Self {
        let inner = match method {
            Method::ExAd => AdmmControls::new(1.0, 20, 1e-5),
            Method::FsAd => AdmmControls::new(1.0, 50, 1e-5),
            Method::StPcp => AdmmControls::new(1.0, 1, 0.0),
        };
        SolverParams {
            method,
            alpha,
            beta,
            grid_n: None,
            outer: AdmmControls::new(1.0, 100, 1e-4),
            inner,
            support_threshold_rel: 0.1,
            support_floor_sigmas: 0.0,
        }
    }

    pub fn with_grid(mut self, n: usize) -> Self {
        self.grid_n = Some(n);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(invalid(format!("alpha = {} must be finite and >= 0", self.alpha)));
        }
        if !(self.beta >= 0.0) {
            return Err(invalid(format!("beta = {} must be >= 0", self.beta)));
        }
        if self.grid_n == Some(0) {
            return Err(invalid("grid size must be positive"));
        }
        if !(self.support_threshold_rel > 0.0 && self.support_threshold_rel < 1.0) {
            return Err(invalid("support threshold must lie in (0, 1)"));
        }
        if !(self.support_floor_sigmas >= 0.0) {
            return Err(invalid("support floor must be nonnegative"));
        }
        self.outer.validate()?;
        self.inner.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub h_hat: CMat,
    pub w_hat: CMat,
    pub n_hat: CMat,
    pub detected_support: Vec<bool>,
    pub outer_iterations: usize,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    /// Outer iterations whose inner solve hit its iteration cap.
    pub inner_unconverged: usize,
    pub tau1: f64,
    pub tau2: f64,
}

impl EstimationResult {
    /// Indices flagged as faulty.
    pub fn support_indices(&self) -> Vec<usize> {
        self.detected_support.iter().enumerate().filter(|(_, s)| **s).map(|(i, _)| i).collect()
    }
}

/// `s_i = 1` iff row `i` of `W` exceeds `threshold_rel` times the largest row norm.
pub fn detect_faults(w_hat: &CMat, threshold_rel: f64) -> Result<Vec<bool>> {
    detect_faults_with_floor(w_hat, threshold_rel, 0.0)
}

/// As [`detect_faults`], additionally requiring the row norm to exceed `floor`.
pub fn detect_faults_with_floor(w_hat: &CMat, threshold_rel: f64, floor: f64) -> Result<Vec<bool>> {
    if !(threshold_rel > 0.0 && threshold_rel < 1.0) {
        return Err(invalid(format!("threshold {threshold_rel} outside (0, 1)")));
    }
    let norms = row_norms(w_hat);
    let top = norms.iter().copied().fold(0.0, f64::max);
    let cut = (threshold_rel * top).max(floor);
    Ok(norms.into_iter().map(|r| r > cut && r > 0.0).collect())
}

enum Backend {
    Sdp(Option<SdpState>),
    Grid(GridOperator, Option<CMat>),
    Nuclear,
}

impl Backend {
    /// Channel prox step; returns the new `H`, its regularizer value and
    /// whether the inner solver converged.
    fn step(&mut self, v: &CMat, t: f64, inner: &AdmmControls) -> Result<(CMat, f64, bool)> {
        match self {
            Backend::Sdp(state) => {
                let out = prox_atomic_sdp(v, t, inner, state.as_ref())?;
                // the shortcut paths leave the state untouched
                let norm = if out.iterations == 0 { 0.0 } else { out.state.trace_value() };
                let ok = out.converged;
                *state = Some(out.state);
                Ok((out.h, norm.max(0.0), ok))
            }
            Backend::Grid(op, g) => {
                let out = prox_atomic_grid(v, t, op, inner, g.as_ref())?;
                let norm = row_l21_norm(&out.g);
                *g = Some(out.g);
                Ok((out.h, norm, out.converged))
            }
            Backend::Nuclear => {
                let h = prox_nuclear(v, t)?;
                let norm = nuclear_norm(&h);
                Ok((h, norm, true))
            }
        }
    }
}

/// Runs the exchange ADMM from `H = W = N = U = 0`.
pub fn decompose(obs: &Observation, params: &SolverParams) -> Result<EstimationResult> {
    params.validate()?;
    let z = &obs.z;
    let (m, k) = z.shape();
    if m == 0 || k == 0 {
        return Err(invalid("empty observation"));
    }
    if z.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(invalid("observation has non-finite entries"));
    }
    let tau1 = params.alpha * spectral_norm(z);
    let tau2 = if params.beta.is_infinite() { f64::INFINITY } else { params.beta * row_linf_norm(z) };
    let lam = params.outer.penalty;
    let mut backend = match params.method {
        Method::ExAd => Backend::Sdp(None),
        Method::FsAd => Backend::Grid(GridOperator::new(m, params.grid_n.unwrap_or(m * k))?, None),
        Method::StPcp => Backend::Nuclear,
    };

    let z3 = z.scale(1.0 / 3.0);
    let z_norm = z.norm();
    let mut h = CMat::zeros(m, k);
    let mut w = CMat::zeros(m, k);
    let mut n = CMat::zeros(m, k);
    let mut u = CMat::zeros(m, k);
    let mut xbar = CMat::zeros(m, k);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut outer_iterations = 0;
    let mut inner_unconverged = 0;

    for _ in 0..params.outer.max_iters {
        outer_iterations += 1;
        let shift = &z3 - &xbar - &u;
        let (h_new, reg_h, ok) = backend.step(&(&h + &shift), lam * tau1, &params.inner)?;
        if !ok {
            inner_unconverged += 1;
        }
        let w_new = prox_row_l21(&(&w + &shift), lam * tau2)?;
        let n_new = (&n + &shift).scale(1.0 / (1.0 + lam));
        let xbar_new = (&h_new + &w_new + &n_new).scale(1.0 / 3.0);
        u += &xbar_new - &z3;

        let dxbar = &xbar_new - &xbar;
        let dual = ((&h_new - &h - &dxbar).norm_squared()
            + (&w_new - &w - &dxbar).norm_squared()
            + (&n_new - &n - &dxbar).norm_squared())
        .sqrt()
            / lam;
        let primal = 3.0 * (&xbar_new - &z3).norm();
        h = h_new;
        w = w_new;
        n = n_new;
        xbar = xbar_new;

        let reg_w = if tau2.is_infinite() { 0.0 } else { tau2 * row_l21_norm(&w) };
        trace.push(tau1 * reg_h + reg_w + 0.5 * n.norm_squared());
        let tol = z_norm.max(f64::MIN_POSITIVE);
        if primal <= params.outer.tol_primal * tol && dual <= params.outer.tol_dual * tol {
            converged = true;
            break;
        }
    }

    let floor = params.support_floor_sigmas * (k as f64 * obs.noise_var).sqrt();
    let detected_support = detect_faults_with_floor(&w, params.support_threshold_rel, floor)?;
    Ok(EstimationResult {
        h_hat: h,
        w_hat: w,
        n_hat: n,
        detected_support,
        outer_iterations,
        objective_trace: trace,
        converged,
        inner_unconverged,
        tau1,
        tau2,
    })
}
