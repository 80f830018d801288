//! Uplink detection: MRC and ZF, their variants that drop faulty antennas,
//! PSK mapping, and the large-system MSE limits.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::linalg::pinv_full_column_rank;
use crate::{CMat, CVec, C64};

/// Rank tolerance relative to the largest singular value for ZF.
pub const ZF_RANK_TOL: f64 = 1e-10;

/// Gray-mapped unit-power PSK.
#[derive(Debug, Clone, PartialEq)]
pub struct Psk {
    order: usize,
    points: Vec<C64>,
    /// label -> constellation position
    position: Vec<usize>,
    /// constellation position -> label
    label: Vec<usize>,
}

impl Psk {
    pub fn new(order: usize) -> Result<Self> {
        if ![2, 4, 8].contains(&order) {
            return Err(invalid(format!("PSK order {order} not in {{2, 4, 8}}")));
        }
        let points = (0..order)
            .map(|k| C64::from_polar(1.0, 2.0 * PI * k as f64 / order as f64))
            .collect();
        let label: Vec<usize> = (0..order).map(|k| k ^ (k >> 1)).collect();
        let mut position = vec![0; order];
        for (k, &g) in label.iter().enumerate() {
            position[g] = k;
        }
        Ok(Psk { order, points, position, label })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.order.trailing_zeros() as usize
    }

    /// Constellation point carrying `label`.
    pub fn point(&self, label: usize) -> C64 {
        self.points[self.position[label % self.order]]
    }

    /// Nearest-point decision, returned as a label.
    pub fn decide(&self, x: C64) -> usize {
        let step = 2.0 * PI / self.order as f64;
        let k = (x.arg() / step).round().rem_euclid(self.order as f64) as usize % self.order;
        self.label[k]
    }

    /// Maps a bit string (MSB first per symbol) to symbols.
    pub fn modulate(&self, bits: &[bool]) -> Result<Vec<C64>> {
        let b = self.bits_per_symbol();
        if bits.len() % b != 0 {
            return Err(invalid(format!("{} bits is not a multiple of {b}", bits.len())));
        }
        Ok(bits
            .chunks(b)
            .map(|c| self.point(c.iter().fold(0, |acc, &bit| (acc << 1) | bit as usize)))
            .collect())
    }

    pub fn demodulate(&self, x: &[C64]) -> Vec<bool> {
        let b = self.bits_per_symbol();
        let mut out = Vec::with_capacity(x.len() * b);
        for &s in x {
            let l = self.decide(s);
            out.extend((0..b).rev().map(|i| (l >> i) & 1 == 1));
        }
        out
    }
}

/// Estimates and hard decisions for one received vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverReport {
    pub x_hat: CVec,
    pub decisions: Vec<usize>,
    /// `||x - x_hat||^2 / K` when the truth is supplied.
    pub per_symbol_mse: f64,
}

/// A linear detector `x_hat = G y_kept` precomputed from a channel estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearReceiver {
    g: CMat,
    keep: Vec<usize>,
    m: usize,
}

fn kept_rows(m: usize, omega: &[usize]) -> Result<Vec<usize>> {
    let mut drop = vec![false; m];
    for &i in omega {
        if i >= m {
            return Err(invalid(format!("antenna index {i} out of range for M = {m}")));
        }
        drop[i] = true;
    }
    let keep: Vec<usize> = (0..m).filter(|&i| !drop[i]).collect();
    if keep.is_empty() {
        return Err(invalid("every antenna is excluded"));
    }
    Ok(keep)
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("rho = {rho} must be positive")))
    }
}

impl LinearReceiver {
    /// Matched filter `H_bar* y_bar / (sqrt(rho) M')` over the kept antennas.
    pub fn mrc(h: &CMat, rho: f64, omega: &[usize]) -> Result<Self> {
        check_rho(rho)?;
        let keep = kept_rows(h.nrows(), omega)?;
        let hb = h.select_rows(&keep);
        let g = hb.adjoint().scale(1.0 / (rho.sqrt() * keep.len() as f64));
        Ok(LinearReceiver { g, keep, m: h.nrows() })
    }

    /// Zero forcing `H_bar^+ y_bar / sqrt(rho)` over the kept antennas.
    pub fn zf(h: &CMat, rho: f64, omega: &[usize]) -> Result<Self> {
        check_rho(rho)?;
        let keep = kept_rows(h.nrows(), omega)?;
        let hb = h.select_rows(&keep);
        let g = pinv_full_column_rank(&hb, ZF_RANK_TOL)?.scale(1.0 / rho.sqrt());
        Ok(LinearReceiver { g, keep, m: h.nrows() })
    }

    pub fn apply(&self, y: &CVec) -> Result<CVec> {
        if y.len() != self.m {
            return Err(invalid(format!("y has length {}, expected {}", y.len(), self.m)));
        }
        if self.keep.len() == self.m {
            return Ok(&self.g * y);
        }
        let yb = CVec::from_iterator(self.keep.len(), self.keep.iter().map(|&i| y[i]));
        Ok(&self.g * yb)
    }

    pub fn detect(&self, y: &CVec, psk: &Psk, truth: Option<&CVec>) -> Result<ReceiverReport> {
        let x_hat = self.apply(y)?;
        let decisions = x_hat.iter().map(|&v| psk.decide(v)).collect();
        let per_symbol_mse = match truth {
            Some(x) => (x - &x_hat).norm_squared() / x.len() as f64,
            None => f64::NAN,
        };
        Ok(ReceiverReport { x_hat, decisions, per_symbol_mse })
    }
}

/// `x_hat = H* y / (sqrt(rho) M)`.
pub fn mrc(h: &CMat, y: &CVec, rho: f64) -> Result<CVec> {
    LinearReceiver::mrc(h, rho, &[])?.apply(y)
}

/// MRC after deleting the antennas in `omega`, normalized by `M - |omega|`.
pub fn mrc_modified(h: &CMat, y: &CVec, rho: f64, omega: &[usize]) -> Result<CVec> {
    LinearReceiver::mrc(h, rho, omega)?.apply(y)
}

/// `x_hat = H^+ y / sqrt(rho)`.
pub fn zf(h: &CMat, y: &CVec, rho: f64) -> Result<CVec> {
    LinearReceiver::zf(h, rho, &[])?.apply(y)
}

pub fn zf_modified(h: &CMat, y: &CVec, rho: f64, omega: &[usize]) -> Result<CVec> {
    LinearReceiver::zf(h, rho, omega)?.apply(y)
}

/// Large-system limit `K^2/P + K/P` of the modified MRC error.
pub fn asymptotic_mse_mrc(k: usize, p: usize) -> Result<f64> {
    if p == 0 {
        return Err(invalid("P must be positive"));
    }
    let (k, p) = (k as f64, p as f64);
    Ok(k * k / p + k / p)
}

/// Bound `K gamma^2 ||w||_inf^2 / rho` on the MRC excess error due to faults.
pub fn asymptotic_excess_bound(k: usize, gamma: f64, rho: f64, w_inf: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok(k as f64 * gamma * gamma * w_inf * w_inf / rho)
}

/// Streaming mean and standard error.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl Extend<f64> for MeanAccumulator {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.push(x);
        }
    }
}
