//! Atomic-norm prox and norm through the SDP
//!
//! ```text
//! minimize   tau (Tr T(a) / 2 + Tr B / 2) + 1/2 ||H - V||_F^2
//! subject to [[T(a), H], [H*, B]] >= 0,   T(a) Hermitian Toeplitz
//! ```
//!
//! solved by ADMM on the splitting `Theta(a, B, H) = Q`, `Q >= 0`. The
//! trace term is already calibrated: the unit atom `a(f) u* / sqrt(M)` has
//! value exactly one, so no rescaling is applied.
//!
//! Both entry points normalize their input to unit Frobenius norm before
//! iterating, which keeps the penalty meaningful across scales.

use crate::error::{invalid, Result};
use crate::linalg::{hermitian_eig, project_psd, trace_re};
use crate::prox::{c, check_threshold, AdmmControls};
use crate::{CMat, CVec, C64};

/// Residual ratio that triggers a penalty update.
const BALANCE_RATIO: f64 = 10.0;
const BALANCE_FACTOR: f64 = 2.0;
const PENALTY_MIN: f64 = 1e-4;
const PENALTY_MAX: f64 = 1e4;

/// ADMM iterate of the SDP solver, kept between calls for warm starts.
///
/// Stored in the normalized units of the call that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpState {
    /// Toeplitz generator: first column of `T(a)`.
    pub a: CVec,
    pub b: CMat,
    /// PSD copy of the block matrix.
    pub q: CMat,
    /// Dual variable of `Theta = Q`.
    pub lambda: CMat,
    pub h: CMat,
    /// Penalty reached by residual balancing.
    pub penalty: f64,
    /// Normalization applied to the problem data.
    pub scale: f64,
}

impl SdpState {
    fn zeros(m: usize, k: usize, penalty: f64, scale: f64) -> Self {
        SdpState {
            a: CVec::zeros(m),
            b: CMat::zeros(k, k),
            q: CMat::zeros(m + k, m + k),
            lambda: CMat::zeros(m + k, m + k),
            h: CMat::zeros(m, k),
            penalty,
            scale,
        }
    }

    fn dims(&self) -> (usize, usize) {
        self.h.shape()
    }

    fn rescaled(&self, new_scale: f64) -> Self {
        let r = self.scale / new_scale;
        SdpState {
            a: self.a.scale(r),
            b: self.b.scale(r),
            q: self.q.scale(r),
            lambda: self.lambda.scale(r),
            h: self.h.scale(r),
            penalty: self.penalty,
            scale: new_scale,
        }
    }

    /// `T(a)` in the units of the original problem.
    pub fn toeplitz(&self) -> CMat {
        toeplitz(&self.a).scale(self.scale)
    }

    /// Surrogate norm `Tr T(a) / 2 + Tr B / 2` in the units of the original problem.
    pub fn trace_value(&self) -> f64 {
        0.5 * self.scale * (self.m() as f64 * self.a[0].re + trace_re(&self.b))
    }

    fn m(&self) -> usize {
        self.a.len()
    }

    /// `[[T(a), H], [H*, B]]` in the units of the original problem.
    pub fn block(&self) -> CMat {
        assemble(&toeplitz(&self.a), &self.h, &self.b).scale(self.scale)
    }
}

/// Output of [`prox_atomic_sdp`].
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProx {
    pub h: CMat,
    /// SDP surrogate objective per iteration, in the original units.
    pub objective: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub state: SdpState,
}

/// Output of [`atomic_norm_sdp`].
#[derive(Debug, Clone, PartialEq)]
pub struct NormEstimate {
    /// Feasible upper bound on the atomic norm built from the SDP iterate.
    pub value: f64,
    /// Lower bound from the dual iterate (weak duality), zero if unavailable.
    pub lower: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Hermitian Toeplitz matrix with first column `a` (`a[0]` taken as real).
pub fn toeplitz(a: &CVec) -> CMat {
    let m = a.len();
    CMat::from_fn(m, m, |i, j| {
        if i == j {
            c(a[0].re)
        } else if i > j {
            a[i - j]
        } else {
            a[j - i].conj()
        }
    })
}

/// Least-squares projection of a Hermitian matrix onto Hermitian Toeplitz
/// matrices: the average of every diagonal.
pub fn toeplitz_average(x: &CMat) -> CVec {
    let m = x.nrows();
    let mut a = CVec::zeros(m);
    a[0] = c((0..m).map(|i| x[(i, i)].re).sum::<f64>() / m as f64);
    for d in 1..m {
        let mut s = C64::new(0.0, 0.0);
        for i in 0..m - d {
            s += x[(i + d, i)] + x[(i, i + d)].conj();
        }
        a[d] = s / c(2.0 * (m - d) as f64);
    }
    a
}

fn assemble(t: &CMat, h: &CMat, b: &CMat) -> CMat {
    let (m, k) = h.shape();
    let mut out = CMat::zeros(m + k, m + k);
    out.view_mut((0, 0), (m, m)).copy_from(t);
    out.view_mut((0, m), (m, k)).copy_from(h);
    out.view_mut((m, 0), (k, m)).copy_from(&h.adjoint());
    out.view_mut((m, m), (k, k)).copy_from(b);
    out
}

enum Data<'a> {
    /// Prox: `H` is free and pulled towards `V`.
    Prox(&'a CMat),
    /// Norm evaluation: `H` is pinned.
    Fixed(&'a CMat),
}

struct Run {
    state: SdpState,
    objective: Vec<f64>,
    converged: bool,
    iterations: usize,
}

/// The ADMM loop in normalized units.
fn run_admm(data: Data<'_>, tau: f64, controls: &AdmmControls, mut st: SdpState, obj_scale: f64) -> Result<Run> {
    let (m, k) = st.dims();
    let mut rho = st.penalty;
    let mut objective = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..controls.max_iters {
        iterations = it + 1;
        let s = &st.q - st.lambda.scale(1.0 / rho);
        let shift = tau / (2.0 * rho);
        st.a = toeplitz_average(&s.view((0, 0), (m, m)).clone_owned());
        st.a[0] -= c(shift);
        let s22 = s.view((m, m), (k, k)).clone_owned();
        st.b = (&s22 + s22.adjoint()).scale(0.5) - CMat::identity(k, k).scale(shift);
        match data {
            Data::Prox(v) => {
                let s12 = s.view((0, m), (m, k)).clone_owned();
                st.h = (v + s12.scale(2.0 * rho)).scale(1.0 / (1.0 + 2.0 * rho));
            }
            Data::Fixed(h) => st.h.copy_from(h),
        }
        let t = toeplitz(&st.a);
        let theta = assemble(&t, &st.h, &st.b);
        let q_old = std::mem::replace(&mut st.q, project_psd(&(&theta + st.lambda.scale(1.0 / rho)))?);
        let resid = &theta - &st.q;
        st.lambda += resid.scale(rho);

        let mut obj = tau * 0.5 * (trace_re(&t) + trace_re(&st.b));
        if let Data::Prox(v) = data {
            obj += 0.5 * (&st.h - v).norm_squared();
        }
        objective.push(obj * obj_scale);

        let r_pri = resid.norm();
        let r_dual = rho * (&st.q - &q_old).norm();
        let eps_pri = controls.tol_primal * theta.norm().max(st.q.norm()).max(1e-12);
        let eps_dual = controls.tol_dual * st.lambda.norm().max(1e-12);
        if it > 0 && r_pri <= eps_pri && r_dual <= eps_dual {
            converged = true;
            break;
        }
        if r_pri > BALANCE_RATIO * r_dual && rho < PENALTY_MAX {
            rho *= BALANCE_FACTOR;
        } else if r_dual > BALANCE_RATIO * r_pri && rho > PENALTY_MIN {
            rho /= BALANCE_FACTOR;
        }
    }
    st.penalty = rho;
    Ok(Run { state: st, objective, converged, iterations })
}

fn initial_state(m: usize, k: usize, controls: &AdmmControls, scale: f64, warm: Option<&SdpState>) -> Result<SdpState> {
    match warm {
        Some(w) => {
            if w.dims() != (m, k) {
                return Err(invalid(format!("warm start is {:?}, problem is {}x{}", w.dims(), m, k)));
            }
            Ok(w.rescaled(scale))
        }
        None => Ok(SdpState::zeros(m, k, controls.penalty, scale)),
    }
}

/// `argmin_H t ||H||_A + 1/2 ||H - V||_F^2` through the SDP.
///
/// `t = 0` returns `V`. When `t >= ||V||_2` (which dominates the dual atomic
/// norm) the prox is exactly zero and is returned without iterating.
pub fn prox_atomic_sdp(v: &CMat, t: f64, controls: &AdmmControls, warm: Option<&SdpState>) -> Result<SdpProx> {
    check_threshold(t)?;
    controls.validate()?;
    let (m, k) = v.shape();
    if m == 0 || k == 0 {
        return Err(invalid("empty input"));
    }
    let scale = v.norm();
    let trivial = |h: CMat, obj: f64, st: SdpState| SdpProx { h, objective: vec![obj], converged: true, iterations: 0, state: st };
    if scale == 0.0 {
        return Ok(trivial(v.clone(), 0.0, SdpState::zeros(m, k, controls.penalty, 1.0)));
    }
    if t == 0.0 {
        let mut st = initial_state(m, k, controls, scale, warm)?;
        st.h = v.scale(1.0 / scale);
        return Ok(trivial(v.clone(), 0.0, st));
    }
    if t >= crate::metrics::spectral_norm(v) {
        let st = initial_state(m, k, controls, scale, warm)?;
        return Ok(trivial(CMat::zeros(m, k), 0.5 * scale * scale, st));
    }
    let st = initial_state(m, k, controls, scale, warm)?;
    let vn = v.scale(1.0 / scale);
    let run = run_admm(Data::Prox(&vn), t / scale, controls, st, scale * scale)?;
    Ok(SdpProx {
        h: run.state.h.scale(scale),
        objective: run.objective,
        converged: run.converged,
        iterations: run.iterations,
        state: run.state,
    })
}

/// Atomic norm of `H` from the SDP with `H` pinned.
///
/// The reported value is `min_eps sqrt(Tr(T_eps) Tr(H* T_eps^{-1} H))` over
/// ridged copies `T_eps = T(a) + eps I` of the final Toeplitz iterate. Each
/// such `T_eps` is a feasible point, so the value is an upper bound that is
/// tight once the solver has converged.
pub fn atomic_norm_sdp(h: &CMat, controls: &AdmmControls) -> Result<NormEstimate> {
    controls.validate()?;
    let (m, k) = h.shape();
    if m == 0 || k == 0 {
        return Err(invalid("empty input"));
    }
    let scale = h.norm();
    if scale == 0.0 {
        return Ok(NormEstimate { value: 0.0, lower: 0.0, converged: true, iterations: 0 });
    }
    let hn = h.scale(1.0 / scale);
    let mut st = SdpState::zeros(m, k, controls.penalty, scale);
    st.h = hn.clone();
    let run = run_admm(Data::Fixed(&hn), 1.0, controls, st, scale)?;
    let upper = feasible_value(&toeplitz(&run.state.a), &hn)?;
    let lower = dual_lower_bound(&run.state.lambda, &hn);
    Ok(NormEstimate {
        value: upper * scale,
        lower: lower * scale,
        converged: run.converged,
        iterations: run.iterations,
    })
}

/// Smallest `sqrt(Tr(T + eps I) Tr(H* (T + eps I)^{-1} H))` over a log grid of
/// ridges that make `T + eps I` positive definite.
fn feasible_value(t: &CMat, h: &CMat) -> Result<f64> {
    let m = t.nrows();
    let (vals, u) = hermitian_eig(t)?;
    let proj = u.adjoint() * h;
    let weights: Vec<f64> = (0..m).map(|i| proj.row(i).norm_squared()).collect();
    let tr: f64 = vals.iter().sum();
    let lam_min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let lam_max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(1e-300);
    let base = (-lam_min).max(0.0);
    let mut best = f64::INFINITY;
    for e in -160..=20 {
        let eps = base + lam_max * 10f64.powf(e as f64 / 10.0);
        let quad: f64 = vals.iter().zip(&weights).map(|(l, w)| w / (l + eps)).sum();
        let value = ((tr + m as f64 * eps) * quad).sqrt();
        if value.is_finite() {
            best = best.min(value);
        }
    }
    // the scaled identity is always feasible
    best = best.min((m as f64 * h.norm_squared()).sqrt());
    Ok(best)
}

/// `Re <Y, H> / ||Y||*_A` for `Y` taken from the off-diagonal dual block, with
/// the dual norm bounded from above on a fine grid.
fn dual_lower_bound(lambda: &CMat, h: &CMat) -> f64 {
    let (m, k) = h.shape();
    let y = lambda.view((0, m), (m, k)).clone_owned();
    let ip: f64 = crate::linalg::inner_re(&y, h);
    let y = if ip < 0.0 { -y } else { y };
    let fineness = (64 * m).max(4 * m);
    match crate::prox::grid::dual_atomic_norm_bound(&y, fineness) {
        Ok(d) if d > 0.0 => (ip.abs() / d).max(0.0),
        _ => 0.0,
    }
}
