//! Physical channel, pilots, faulty-antenna corruption and noise.
//!
//! Everything downstream consumes the decorrelated observation
//! `Z = Y Φ* / sqrt(P/K) = H + W + N` produced by [`decorrelate`].

use std::f64::consts::{FRAC_PI_2, PI};

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::receivers::Psk;
use crate::{CMat, CVec, C64};

/// Distortion amplitude of a faulty antenna in units of `sqrt(rho)`.
pub const FAULT_AMPLITUDE_FACTOR: f64 = 4.0;

const ANGLE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AoaMode {
    /// `theta_p = -pi/2 + p * pi / P` for `p = 0..P`.
    UniformGrid,
    /// i.i.d. uniform on `[-pi/2, pi/2]`.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Base-station antennas.
    pub m: usize,
    /// Single-antenna users.
    pub k: usize,
    /// Pilot length in symbols.
    pub l: usize,
    /// Propagation paths.
    pub p: usize,
    /// Fraction of faulty antennas; `S = floor(gamma * M)`.
    pub gamma: f64,
    /// Antenna spacing over wavelength.
    pub d_over_lambda: f64,
    /// Variance of each training-noise entry.
    pub sigma2: f64,
    /// Per-user transmit symbol power.
    pub rho: f64,
    /// Total pilot power `||X||_F^2`.
    pub total_pilot_power: f64,
    pub aoa_mode: AoaMode,
    pub seed: u64,
}

/// How an SNR in dB maps to noise and power levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnrConvention {
    /// `SNR = rho / sigma2` with `rho = P_total / (K L)` the per-symbol pilot
    /// power (`rho = 1`).
    PerSymbol,
    /// `SNR = P_total / sigma2` with `rho = P_total / K` the per-user pilot
    /// energy (`rho = 1`). The decorrelated noise variance is `K / SNR`.
    TotalPilot,
}

impl SnrConvention {
    pub fn name(self) -> &'static str {
        match self {
            SnrConvention::PerSymbol => "per_symbol",
            SnrConvention::TotalPilot => "total_pilot",
        }
    }
}

impl std::str::FromStr for SnrConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_symbol" => Ok(SnrConvention::PerSymbol),
            "total_pilot" => Ok(SnrConvention::TotalPilot),
            _ => Err(invalid(format!("unknown SNR convention {s:?}"))),
        }
    }
}

impl SystemConfig {
    /// Configuration at a given SNR, `D/lambda = 0.3` and uniform-grid AoAs.
    #[allow(clippy::too_many_arguments)]
    pub fn from_snr_db(
        m: usize,
        k: usize,
        l: usize,
        p: usize,
        gamma: f64,
        snr_db: f64,
        convention: SnrConvention,
        seed: u64,
    ) -> Self {
        let snr = 10f64.powf(snr_db / 10.0);
        let (rho, total_pilot_power) = match convention {
            SnrConvention::PerSymbol => (1.0, (k * l) as f64),
            SnrConvention::TotalPilot => (1.0, k as f64),
        };
        let sigma2 = match convention {
            SnrConvention::PerSymbol => rho / snr,
            SnrConvention::TotalPilot => total_pilot_power / snr,
        };
        SystemConfig {
            m,
            k,
            l,
            p,
            gamma,
            d_over_lambda: 0.3,
            sigma2,
            rho,
            total_pilot_power,
            aoa_mode: AoaMode::UniformGrid,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.k == 0 || self.l == 0 || self.p == 0 {
            return Err(invalid("M, K, L and P must be positive"));
        }
        if self.k > self.m {
            return Err(invalid(format!("K = {} exceeds M = {}", self.k, self.m)));
        }
        if self.l < self.k {
            return Err(invalid(format!("pilot length L = {} < K = {}", self.l, self.k)));
        }
        if self.p >= self.m {
            return Err(invalid(format!("P = {} must be below M = {}", self.p, self.m)));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(invalid(format!("gamma = {} outside [0, 1]", self.gamma)));
        }
        if !(self.d_over_lambda > 0.0 && self.d_over_lambda < 1.0) {
            return Err(invalid(format!("D/lambda = {} outside (0, 1)", self.d_over_lambda)));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(invalid(format!("sigma2 = {} must be finite and >= 0", self.sigma2)));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(invalid(format!("rho = {} must be positive", self.rho)));
        }
        if !(self.total_pilot_power > 0.0 && self.total_pilot_power.is_finite()) {
            return Err(invalid("total pilot power must be positive"));
        }
        Ok(())
    }

    /// Number of faulty antennas `floor(gamma * M)`.
    pub fn fault_count(&self) -> usize {
        ((self.gamma * self.m as f64) + 1e-9).floor() as usize
    }

    /// Variance of each entry of the decorrelated noise, `K sigma2 / P_total`.
    pub fn decorrelated_noise_var(&self) -> f64 {
        self.k as f64 * self.sigma2 / self.total_pilot_power
    }

}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Angles of arrival, radians.
    pub angles: Vec<f64>,
    /// `M x P` steering matrix.
    pub a: CMat,
    /// `P x K` path gains.
    pub g: CMat,
    /// `M x K` channel `A G / sqrt(P)`.
    pub h: CMat,
}

impl ChannelRealization {
    /// Assembles a channel from given angles and path gains.
    pub fn from_parts(angles: Vec<f64>, g: CMat, m: usize, d_over_lambda: f64) -> Result<Self> {
        if g.nrows() != angles.len() {
            return Err(invalid(format!(
                "gain matrix has {} rows for {} angles",
                g.nrows(),
                angles.len()
            )));
        }
        let a = steering_matrix(&angles, m, d_over_lambda)?;
        let h = (&a * &g).scale(1.0 / (angles.len() as f64).sqrt());
        Ok(ChannelRealization { angles, a, g, h })
    }

    pub fn paths(&self) -> usize {
        self.angles.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaultPattern {
    /// Sorted indices of faulty antennas.
    pub support: Vec<usize>,
    /// Magnitude of each distortion entry.
    pub amplitude: f64,
}

impl FaultPattern {
    pub fn none() -> Self {
        FaultPattern { support: Vec::new(), amplitude: 0.0 }
    }

    pub fn new(mut support: Vec<usize>, amplitude: f64, m: usize) -> Result<Self> {
        support.sort_unstable();
        support.dedup();
        if let Some(&last) = support.last() {
            if last >= m {
                return Err(invalid(format!("faulty index {last} out of range for M = {m}")));
            }
        }
        Ok(FaultPattern { support, amplitude })
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// The binary vector `s` with ones at faulty antennas.
    pub fn indicator(&self, m: usize) -> Vec<bool> {
        let mut s = vec![false; m];
        for &i in &self.support {
            s[i] = true;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBlock {
    /// `K x L` row-orthonormal pilot.
    pub pilot: CMat,
    /// Transmitted pilot `sqrt(P_total / K) * pilot`.
    pub x: CMat,
    /// `M x L` received block.
    pub y: CMat,
    /// `M x L` corruption, nonzero only on faulty rows.
    pub w0: CMat,
    /// `M x L` additive noise.
    pub n0: CMat,
}

impl TrainingBlock {
    fn decorrelation_scale(&self) -> f64 {
        let k = self.pilot.nrows() as f64;
        let power = self.x.norm_squared();
        1.0 / (power / k).sqrt()
    }

    /// The corruption and noise as they appear in `Z`: `W0 Φ* / sqrt(P/K)`
    /// and `N0 Φ* / sqrt(P/K)`.
    pub fn decorrelated_parts(&self) -> (CMat, CMat) {
        let s = self.decorrelation_scale();
        let pa = self.pilot.adjoint();
        ((&self.w0 * &pa).scale(s), (&self.n0 * &pa).scale(s))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// `M x K` decorrelated observation.
    pub z: CMat,
    /// Variance of each decorrelated noise entry.
    pub noise_var: f64,
}

/// One uplink data symbol time.
#[derive(Debug, Clone, PartialEq)]
pub struct UplinkSample {
    /// Constellation indices sent by the `K` users.
    pub symbols: Vec<usize>,
    /// Transmitted unit-power symbols.
    pub x: CVec,
    /// Received vector `sqrt(rho) H x + w + n`.
    pub y: CVec,
}

/// Draws one circularly-symmetric complex Gaussian with variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

pub fn complex_gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, var: f64) -> CMat {
    // column-major fill keeps draws in a fixed order
    let mut m = CMat::zeros(rows, cols);
    for v in m.iter_mut() {
        *v = complex_gaussian(rng, var);
    }
    m
}

/// Counter-based substream `stream` of the generator seeded by `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// ULA steering vector, entry `m` equal to `exp(-j 2 pi (D/lambda) sin(theta) m)`.
pub fn steering_vector(theta: f64, m: usize, d_over_lambda: f64) -> Result<CVec> {
    if !(theta.abs() <= FRAC_PI_2 + ANGLE_SLACK) {
        return Err(Error::Domain(format!("angle {theta} outside [-pi/2, pi/2]")));
    }
    if m == 0 {
        return Err(invalid("steering vector needs at least one antenna"));
    }
    let phase = -2.0 * PI * d_over_lambda * theta.sin();
    Ok(CVec::from_iterator(m, (0..m).map(|i| C64::from_polar(1.0, phase * i as f64))))
}

pub fn steering_matrix(angles: &[f64], m: usize, d_over_lambda: f64) -> Result<CMat> {
    let mut a = CMat::zeros(m, angles.len());
    for (p, &theta) in angles.iter().enumerate() {
        a.set_column(p, &steering_vector(theta, m, d_over_lambda)?);
    }
    Ok(a)
}

/// Normalized frequency `f` in `[0, 1)` with `a(theta) = [e^{j 2 pi f m}]_m`.
pub fn angle_to_frequency(theta: f64, d_over_lambda: f64) -> f64 {
    (-d_over_lambda * theta.sin()).rem_euclid(1.0)
}

pub fn sample_angles<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Vec<f64> {
    let p = config.p;
    match config.aoa_mode {
        AoaMode::UniformGrid => (0..p).map(|i| -FRAC_PI_2 + i as f64 * PI / p as f64).collect(),
        AoaMode::Random => (0..p).map(|_| rng.random_range(-FRAC_PI_2..=FRAC_PI_2)).collect(),
    }
}

/// Draws angles and unit-variance complex Gaussian path gains.
pub fn sample_channel<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Result<ChannelRealization> {
    config.validate()?;
    let angles = sample_angles(config, rng);
    let g = complex_gaussian_matrix(rng, config.p, config.k, 1.0);
    ChannelRealization::from_parts(angles, g, config.m, config.d_over_lambda)
}

/// `K` distinct rows (the first `K`) of the normalized `L`-point DFT matrix.
pub fn make_pilot(k: usize, l: usize) -> Result<CMat> {
    if k == 0 {
        return Err(invalid("pilot needs at least one user"));
    }
    if l < k {
        return Err(invalid(format!("pilot length L = {l} shorter than K = {k}")));
    }
    let norm = 1.0 / (l as f64).sqrt();
    Ok(CMat::from_fn(k, l, |r, c| {
        // reduce the exponent mod L before converting to keep phases exact
        let e = (r * c) % l;
        C64::from_polar(norm, -2.0 * PI * e as f64 / l as f64)
    }))
}

/// Uniformly random `floor(gamma M)`-subset of antennas.
pub fn sample_fault_pattern<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Result<FaultPattern> {
    config.validate()?;
    let s = config.fault_count();
    let mut support: Vec<usize> = sample_indices(rng, config.m, s).into_iter().collect();
    support.sort_unstable();
    Ok(FaultPattern { support, amplitude: FAULT_AMPLITUDE_FACTOR * config.rho.sqrt() })
}

/// Random `+-amplitude` entries on the faulty rows of an `m x cols` matrix.
fn bernoulli_rows<R: Rng + ?Sized>(faults: &FaultPattern, m: usize, cols: usize, rng: &mut R) -> CMat {
    let mut w = CMat::zeros(m, cols);
    for &i in &faults.support {
        for j in 0..cols {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            w[(i, j)] = C64::new(sign * faults.amplitude, 0.0);
        }
    }
    w
}

/// Builds `Y = H X + W0 + N0` for one training block.
pub fn simulate_training<R: Rng + ?Sized>(
    channel: &ChannelRealization,
    pilot: &CMat,
    faults: &FaultPattern,
    config: &SystemConfig,
    rng: &mut R,
) -> Result<TrainingBlock> {
    let (m, k) = channel.h.shape();
    if m != config.m || k != config.k {
        return Err(invalid(format!("channel is {m}x{k}, config expects {}x{}", config.m, config.k)));
    }
    if pilot.nrows() != k || pilot.ncols() != config.l {
        return Err(invalid(format!(
            "pilot is {}x{}, expected {}x{}",
            pilot.nrows(),
            pilot.ncols(),
            k,
            config.l
        )));
    }
    if faults.support.iter().any(|&i| i >= m) {
        return Err(invalid("fault support out of range"));
    }
    let x = pilot.scale((config.total_pilot_power / k as f64).sqrt());
    let w0 = bernoulli_rows(faults, m, config.l, rng);
    let n0 = complex_gaussian_matrix(rng, m, config.l, config.sigma2);
    let y = &channel.h * &x + &w0 + &n0;
    Ok(TrainingBlock { pilot: pilot.clone(), x, y, w0, n0 })
}

/// `Z = Y Φ* / sqrt(P_total / K)`.
pub fn decorrelate(block: &TrainingBlock, config: &SystemConfig) -> Observation {
    let k = block.pilot.nrows() as f64;
    let scale = 1.0 / (config.total_pilot_power / k).sqrt();
    let z = (&block.y * block.pilot.adjoint()).scale(scale);
    Observation { z, noise_var: config.decorrelated_noise_var() }
}

/// Uplink data symbols `y = sqrt(rho) H x + w + n` with unit-variance noise.
///
/// The corruption keeps the fault support fixed while its entries
/// (`+-4 sqrt(rho)`) are redrawn every symbol.
pub fn simulate_uplink<R: Rng + ?Sized>(
    channel: &ChannelRealization,
    faults: &FaultPattern,
    rho: f64,
    t: usize,
    psk_order: usize,
    rng: &mut R,
) -> Result<Vec<UplinkSample>> {
    if t == 0 {
        return Err(invalid("need at least one uplink symbol"));
    }
    if !(rho > 0.0) {
        return Err(invalid("uplink power must be positive"));
    }
    let psk = Psk::new(psk_order)?;
    let (m, k) = channel.h.shape();
    let per_symbol = FaultPattern { support: faults.support.clone(), amplitude: FAULT_AMPLITUDE_FACTOR * rho.sqrt() };
    let gain = rho.sqrt();
    let mut out = Vec::with_capacity(t);
    for _ in 0..t {
        let symbols: Vec<usize> = (0..k).map(|_| rng.random_range(0..psk.order())).collect();
        let x = CVec::from_iterator(k, symbols.iter().map(|&s| psk.point(s)));
        let w = bernoulli_rows(&per_symbol, m, 1, rng);
        let n = complex_gaussian_matrix(rng, m, 1, 1.0);
        let y = (&channel.h * &x).scale(gain) + w.column(0) + n.column(0);
        out.push(UplinkSample { symbols, x, y });
    }
    Ok(out)
}
