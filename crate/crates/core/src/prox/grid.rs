//! Gridded atomic norm over the `N`-point frequency grid and dual-norm oracles.
//!
//! The dictionary `F` is `M x N` with columns `a(i/N) / sqrt(M)`. Applying `F`
//! and `F*` costs one length-`N` FFT per column of the operand.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};
use crate::linalg::row_norms;
use crate::metrics::row_l21_norm;
use crate::prox::{check_threshold, shrink_rows_in_place, AdmmControls};
use crate::{CMat, C64};

/// FFT-backed partial DFT dictionary.
#[derive(Clone)]
pub struct GridOperator {
    m: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for GridOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridOperator").field("m", &self.m).field("n", &self.n).finish()
    }
}

impl GridOperator {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(invalid("grid operator needs M, N >= 1"));
        }
        let mut planner = FftPlanner::new();
        Ok(GridOperator { m, n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) })
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn grid_size(&self) -> usize {
        self.n
    }

    /// Grid frequencies `i / N`.
    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n).map(|i| i as f64 / self.n as f64).collect()
    }

    /// True when `F F* = (N/M) I`, i.e. `N >= M`.
    pub fn is_tight(&self) -> bool {
        self.n >= self.m
    }

    /// `||F||_2^2`: `N/M` times the largest number of rows sharing a residue mod `N`.
    pub fn lipschitz(&self) -> f64 {
        self.n as f64 / self.m as f64 * self.m.div_ceil(self.n) as f64
    }

    fn workspace(&self) -> Workspace {
        let scratch = self.forward.get_inplace_scratch_len().max(self.inverse.get_inplace_scratch_len());
        Workspace { buf: vec![C64::new(0.0, 0.0); self.n], scratch: vec![C64::new(0.0, 0.0); scratch] }
    }

    /// `F G` for an `N x K` coefficient matrix.
    pub fn apply(&self, g: &CMat) -> CMat {
        let mut out = CMat::zeros(self.m, g.ncols());
        self.apply_into(g, &mut out, &mut self.workspace());
        out
    }

    fn apply_into(&self, g: &CMat, out: &mut CMat, ws: &mut Workspace) {
        assert_eq!(g.nrows(), self.n, "coefficient rows must equal the grid size");
        let scale = 1.0 / (self.m as f64).sqrt();
        for k in 0..g.ncols() {
            ws.buf.copy_from_slice(g.column(k).as_slice());
            self.inverse.process_with_scratch(&mut ws.buf, &mut ws.scratch);
            let col = &mut out.as_mut_slice()[k * self.m..(k + 1) * self.m];
            for (i, o) in col.iter_mut().enumerate() {
                *o = ws.buf[i % self.n] * scale;
            }
        }
    }

    /// `F* H` for an `M x K` matrix.
    pub fn adjoint(&self, h: &CMat) -> CMat {
        let mut out = CMat::zeros(self.n, h.ncols());
        self.adjoint_into(h, &mut out, &mut self.workspace());
        out
    }

    fn adjoint_into(&self, h: &CMat, out: &mut CMat, ws: &mut Workspace) {
        assert_eq!(h.nrows(), self.m, "row count must equal M");
        let scale = 1.0 / (self.m as f64).sqrt();
        for k in 0..h.ncols() {
            ws.buf.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            for (i, z) in h.as_slice()[k * self.m..(k + 1) * self.m].iter().enumerate() {
                ws.buf[i % self.n] += z;
            }
            self.forward.process_with_scratch(&mut ws.buf, &mut ws.scratch);
            for (o, z) in out.as_mut_slice()[k * self.n..(k + 1) * self.n].iter_mut().zip(&ws.buf) {
                *o = z * scale;
            }
        }
    }

    /// Dense `F`, for tests and small problems.
    pub fn dense(&self) -> CMat {
        let scale = 1.0 / (self.m as f64).sqrt();
        CMat::from_fn(self.m, self.n, |i, j| {
            let e = (i * j) % self.n;
            C64::from_polar(scale, 2.0 * PI * e as f64 / self.n as f64)
        })
    }
}

/// FFT buffer and scratch reused across operator applications.
struct Workspace {
    buf: Vec<C64>,
    scratch: Vec<C64>,
}

/// Output of [`prox_atomic_grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridProx {
    pub h: CMat,
    /// Row-sparse coefficients, `h = F g`.
    pub g: CMat,
    pub objective: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

fn group_lasso_objective(g: &CMat, fg: &CMat, v: &CMat, t: f64) -> f64 {
    let fit: f64 = fg.as_slice().iter().zip(v.as_slice()).map(|(a, b)| (a - b).norm_sqr()).sum();
    t * row_l21_norm(g) + 0.5 * fit
}

/// `out = a + beta (a - b)`.
fn extrapolate(out: &mut CMat, a: &CMat, b: &CMat, beta: f64) {
    for ((o, a), b) in out.as_mut_slice().iter_mut().zip(a.as_slice()).zip(b.as_slice()) {
        *o = a * (1.0 + beta) - b * beta;
    }
}

/// `argmin_G t ||G||_{2,1} + 1/2 ||F G - V||_F^2` by FISTA with restart,
/// returning `H = F G`.
///
/// `warm` seeds the coefficients. With `t = 0` and `N >= M` the minimum-norm
/// solution `(M/N) F* V` is returned directly.
pub fn prox_atomic_grid(v: &CMat, t: f64, op: &GridOperator, controls: &AdmmControls, warm: Option<&CMat>) -> Result<GridProx> {
    check_threshold(t)?;
    controls.validate()?;
    if v.nrows() != op.rows() {
        return Err(invalid(format!("V has {} rows, operator expects {}", v.nrows(), op.rows())));
    }
    let (n, k) = (op.grid_size(), v.ncols());
    if t == 0.0 && op.is_tight() {
        let g = op.adjoint(v).scale(op.rows() as f64 / n as f64);
        let h = op.apply(&g);
        let obj = 0.5 * (&h - v).norm_squared();
        return Ok(GridProx { h, g, objective: vec![obj], converged: true, iterations: 0 });
    }
    let lip = op.lipschitz();
    let step = 1.0 / lip;
    let mut x = match warm {
        Some(g0) if g0.shape() == (n, k) => g0.clone(),
        Some(g0) => return Err(invalid(format!("warm start is {:?}, expected {n}x{k}", g0.shape()))),
        None => CMat::zeros(n, k),
    };
    let mut ws = op.workspace();
    let mut fx = CMat::zeros(op.rows(), k);
    op.apply_into(&x, &mut fx, &mut ws);
    let mut obj = group_lasso_objective(&x, &fx, v, t);
    let mut objective = vec![obj];
    let mut y = x.clone();
    let mut fy = fx.clone();
    let mut resid = fx.clone();
    let mut x_new = x.clone();
    let mut fx_new = fx.clone();
    let mut theta = 1.0f64;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..controls.max_iters {
        iterations = it + 1;
        resid.copy_from(&fy);
        resid -= v;
        op.adjoint_into(&resid, &mut x_new, &mut ws);
        // x_new = y - step * grad
        for (g, yv) in x_new.as_mut_slice().iter_mut().zip(y.as_slice()) {
            *g = yv - *g * step;
        }
        shrink_rows_in_place(&mut x_new, t * step);
        op.apply_into(&x_new, &mut fx_new, &mut ws);
        let obj_new = group_lasso_objective(&x_new, &fx_new, v, t);
        if obj_new > obj && theta > 1.0 {
            // momentum overshoot: restart from the last iterate
            theta = 1.0;
            y.copy_from(&x);
            fy.copy_from(&fx);
            continue;
        }
        let change = x_new.as_slice().iter().zip(x.as_slice()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let theta_new = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let beta = (theta - 1.0) / theta_new;
        // y = x_new + beta (x_new - x)
        extrapolate(&mut y, &x_new, &x, beta);
        extrapolate(&mut fy, &fx_new, &fx, beta);
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut fx, &mut fx_new);
        theta = theta_new;
        obj = obj_new;
        objective.push(obj);
        if change <= controls.tol_primal * x.norm().max(1e-12) {
            converged = true;
            break;
        }
    }
    Ok(GridProx { h: fx, g: x, objective, converged, iterations })
}

/// `min ||G||_{2,1}` subject to `F G = H`, by ADMM with the closed-form
/// projection `X - (M/N) F* (F X - H)`. Requires `N >= M`.
///
/// Returns the norm of the projection of the sparse iterate onto the
/// constraint set, a feasible (hence upper) value.
pub fn gridded_atomic_norm(h: &CMat, op: &GridOperator, controls: &AdmmControls) -> Result<(f64, bool)> {
    controls.validate()?;
    if h.nrows() != op.rows() {
        return Err(invalid(format!("H has {} rows, operator expects {}", h.nrows(), op.rows())));
    }
    if !op.is_tight() {
        return Err(invalid(format!("gridded norm needs N >= M (N = {}, M = {})", op.grid_size(), op.rows())));
    }
    let scale = h.norm();
    if scale == 0.0 {
        return Ok((0.0, true));
    }
    let hn = h.scale(1.0 / scale);
    let ratio = op.rows() as f64 / op.grid_size() as f64;
    let project = |x: &CMat| -> CMat { x - op.adjoint(&(op.apply(x) - &hn)).scale(ratio) };
    let mut rho = controls.penalty;
    let mut x = op.adjoint(&hn).scale(ratio);
    let mut z = x.clone();
    let mut u = CMat::zeros(x.nrows(), x.ncols());
    let mut converged = false;
    for _ in 0..controls.max_iters {
        x = project(&(&z - &u));
        let z_old = z.clone();
        z = &x + &u;
        shrink_rows_in_place(&mut z, 1.0 / rho);
        let r = &x - &z;
        u += &r;
        let r_pri = r.norm();
        let r_dual = rho * (&z - &z_old).norm();
        if r_pri <= controls.tol_primal * x.norm().max(z.norm()) && r_dual <= controls.tol_dual * (rho * u.norm()).max(1e-12) {
            converged = true;
            break;
        }
        if r_pri > 10.0 * r_dual {
            rho *= 2.0;
            u = u.scale(0.5);
        } else if r_dual > 10.0 * r_pri {
            rho *= 0.5;
            u = u.scale(2.0);
        }
    }
    let feasible = project(&z);
    Ok((row_l21_norm(&feasible).min(row_l21_norm(&x)) * scale, converged))
}

/// `sum_k |v_k(f)|^2` on the grid `f = j / N`, where
/// `v_k(f) = M^{-1/2} sum_i conj(V_ik) e^{j 2 pi f i}`.
fn dual_polynomial(v: &CMat, n: usize) -> Vec<f64> {
    let m = v.nrows();
    let mut planner = FftPlanner::new();
    let inv = planner.plan_fft_inverse(n);
    let mut acc = vec![0.0; n];
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for k in 0..v.ncols() {
        buf.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        for i in 0..m {
            buf[i % n] += v[(i, k)].conj();
        }
        inv.process(&mut buf);
        for (a, z) in acc.iter_mut().zip(&buf) {
            *a += z.norm_sqr() / m as f64;
        }
    }
    acc
}

/// Dual atomic norm evaluated on a grid of `fineness >= 4M` frequencies.
///
/// This is the dual of the gridded norm on that grid and a lower bound on the
/// continuous dual norm.
pub fn dual_atomic_norm(v: &CMat, fineness: usize) -> Result<f64> {
    let m = v.nrows();
    if m == 0 {
        return Err(invalid("empty input"));
    }
    if fineness < 4 * m {
        return Err(invalid(format!("fineness {fineness} below 4M = {}", 4 * m)));
    }
    let q = dual_polynomial(v, fineness);
    Ok(q.into_iter().fold(0.0, f64::max).sqrt())
}

/// Upper bound on the continuous dual atomic norm from a grid of `fineness`
/// points.
///
/// `sum_k |v_k(f)|^2` is a trigonometric polynomial of degree `M - 1`, so by
/// Bernstein's inequality its maximum is at most the grid maximum divided by
/// `1 - pi (M - 1) / fineness`.
pub fn dual_atomic_norm_bound(v: &CMat, fineness: usize) -> Result<f64> {
    let grid = dual_atomic_norm(v, fineness)?;
    let m = v.nrows() as f64;
    Ok(grid / (1.0 - PI * (m - 1.0) / fineness as f64).sqrt())
}

/// Dual of the gridded norm: `||F* V||_{2,inf}`.
pub fn gridded_dual_norm(v: &CMat, op: &GridOperator) -> f64 {
    row_norms(&op.adjoint(v)).into_iter().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prox::c;

    fn grid_atom(m: usize, n: usize, idx: usize, u: &[C64]) -> CMat {
        let op = GridOperator::new(m, n).unwrap();
        let mut g = CMat::zeros(n, u.len());
        for (k, &x) in u.iter().enumerate() {
            g[(idx, k)] = x;
        }
        op.apply(&g)
    }

    #[test]
    fn operator_matches_dense_and_is_tight() {
        for (m, n) in [(8, 64), (6, 6), (5, 16), (12, 5), (12, 120), (7, 21)] {
            let op = GridOperator::new(m, n).unwrap();
            let f = op.dense();
            let g = CMat::from_fn(n, 2, |i, j| C64::new((i + j) as f64 * 0.1, (i * j) as f64 * 0.05 - 0.2));
            assert!((op.apply(&g) - &f * &g).norm() < 1e-10);
            let h = CMat::from_fn(m, 2, |i, j| C64::new(i as f64 - j as f64, 0.3 * i as f64));
            assert!((op.adjoint(&h) - f.adjoint() * &h).norm() < 1e-10);
            let gram = &f * f.adjoint();
            let top = crate::linalg::hermitian_eig(&(f.adjoint() * &f)).unwrap().0;
            assert!((top.last().unwrap() - op.lipschitz()).abs() < 1e-9);
            if op.is_tight() {
                let expect = CMat::identity(m, m).scale(n as f64 / m as f64);
                assert!((gram - expect).norm() < 1e-9);
            }
            for j in 0..n {
                assert!((f.column(j).norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn grid_prox_extremes() {
        let op = GridOperator::new(8, 64).unwrap();
        let v = CMat::from_fn(8, 2, |i, j| C64::new((i as f64).sin(), (j as f64 + i as f64).cos()));
        let p = prox_atomic_grid(&v, 0.0, &op, &AdmmControls::grid_default(), None).unwrap();
        assert!((&p.h - &v).norm() < 1e-10);
        let p = prox_atomic_grid(&v, 1e6, &op, &AdmmControls::grid_default(), None).unwrap();
        assert_eq!(p.g, CMat::zeros(64, 2));
        assert_eq!(p.h, CMat::zeros(8, 2));
    }

    #[test]
    fn gridded_norm_of_atom() {
        let h = grid_atom(8, 64, 5, &[c(0.6), C64::new(0.0, -0.8)]);
        let op = GridOperator::new(8, 64).unwrap();
        let (val, _) = gridded_atomic_norm(&h, &op, &AdmmControls::new(1.0, 5000, 1e-9)).unwrap();
        assert!((val - 1.0).abs() < 1e-3, "{val}");
        assert_eq!(gridded_atomic_norm(&CMat::zeros(8, 2), &op, &AdmmControls::grid_default()).unwrap().0, 0.0);
    }

    #[test]
    fn dual_examples() {
        let m = 8;
        let h = grid_atom(m, 4 * m, 3, &[c(1.0)]);
        assert!((dual_atomic_norm(&h, 16 * m).unwrap() - 1.0).abs() < 1e-12);
        let mut v = CMat::zeros(m, 3);
        v[(2, 0)] = C64::new(1.0, 2.0);
        v[(2, 2)] = c(-2.0);
        let expect = 3.0 / (m as f64).sqrt();
        assert!((dual_atomic_norm(&v, 4 * m).unwrap() - expect).abs() < 1e-12);
        assert!(dual_atomic_norm(&v, 4 * m - 1).is_err());
    }
}
