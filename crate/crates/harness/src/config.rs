//! Flat TOML experiment configuration.
//!
//! Every key is optional except `experiment`; unset keys fall back to the
//! per-experiment defaults in [`ExperimentConfig::resolve`].

use std::path::{Path, PathBuf};
use std::str::FromStr;

use atomic_mimo::model::{AoaMode, SnrConvention, SystemConfig};
use atomic_mimo::solvers::Method;
use serde::Deserialize;

use crate::error::{config_error, HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
pub enum Experiment {
    #[serde(rename = "sweep_alpha")]
    SweepAlpha,
    #[serde(rename = "sweep_P")]
    SweepP,
    #[serde(rename = "zero_faults")]
    ZeroFaults,
    #[serde(rename = "random_aoa")]
    RandomAoa,
    #[serde(rename = "sweep_beta")]
    SweepBeta,
    #[serde(rename = "ser_vs_M")]
    SerVsM,
    #[serde(rename = "asymptotic_check")]
    AsymptoticCheck,
    #[serde(rename = "hybrid_tune")]
    HybridTune,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::SweepAlpha,
        Experiment::SweepP,
        Experiment::ZeroFaults,
        Experiment::RandomAoa,
        Experiment::SweepBeta,
        Experiment::SerVsM,
        Experiment::AsymptoticCheck,
        Experiment::HybridTune,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Experiment::SweepAlpha => "sweep_alpha",
            Experiment::SweepP => "sweep_P",
            Experiment::ZeroFaults => "zero_faults",
            Experiment::RandomAoa => "random_aoa",
            Experiment::SweepBeta => "sweep_beta",
            Experiment::SerVsM => "ser_vs_M",
            Experiment::AsymptoticCheck => "asymptotic_check",
            Experiment::HybridTune => "hybrid_tune",
        }
    }

    /// Name of the swept quantity, used in log output.
    pub fn sweep_name(self) -> &'static str {
        match self {
            Experiment::SweepAlpha | Experiment::ZeroFaults | Experiment::RandomAoa | Experiment::HybridTune => {
                "alpha"
            }
            Experiment::SweepP => "P",
            Experiment::SweepBeta => "beta",
            Experiment::SerVsM | Experiment::AsymptoticCheck => "M",
        }
    }
}

impl FromStr for Experiment {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.id() == s)
            .ok_or_else(|| config_error(format!("unknown experiment {s:?}")))
    }
}

/// The config file as written. Unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: Option<Experiment>,
    pub m: Option<usize>,
    pub k: Option<usize>,
    pub l: Option<usize>,
    pub p: Option<usize>,
    pub gamma: Option<f64>,
    pub snr_db: Option<f64>,
    /// `total_pilot` (default) or `per_symbol`.
    pub snr_convention: Option<String>,
    pub d_over_lambda: Option<f64>,
    /// `uniform` or `random`.
    pub aoa: Option<String>,
    pub methods: Option<Vec<String>>,
    pub baselines: Option<bool>,
    pub sweep: Option<Vec<f64>>,
    pub alpha_exad: Option<f64>,
    pub alpha_fsad: Option<f64>,
    pub alpha_stpcp: Option<f64>,
    pub beta: Option<f64>,
    /// fsAD grid sizes as multiples of `M K`.
    pub grid_factors: Option<Vec<f64>>,
    pub outer_max_iters: Option<usize>,
    pub outer_tol: Option<f64>,
    pub inner_max_iters: Option<usize>,
    pub support_threshold: Option<f64>,
    pub support_floor_sigmas: Option<f64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    /// Uplink symbols per trial for the SER and asymptotic studies.
    pub samples: Option<usize>,
    pub psk_order: Option<usize>,
    pub uplink_snr_db: Option<f64>,
    pub hybrid_method: Option<String>,
    pub hybrid_betas: Option<Vec<f64>>,
}

/// Fully resolved and validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Base system; swept fields are overwritten per sweep value.
    pub system: SystemConfig,
    pub snr_db: f64,
    pub snr_convention: SnrConvention,
    pub methods: Vec<Method>,
    pub baselines: bool,
    pub sweep: Vec<f64>,
    pub alpha_exad: f64,
    pub alpha_fsad: f64,
    pub alpha_stpcp: f64,
    pub beta: f64,
    pub grid_factors: Vec<f64>,
    pub outer_max_iters: usize,
    pub outer_tol: f64,
    pub inner_max_iters: Option<usize>,
    pub support_threshold: f64,
    pub support_floor_sigmas: f64,
    pub trials: usize,
    pub seed: u64,
    /// 0 lets rayon pick.
    pub workers: usize,
    pub out: PathBuf,
    pub samples: usize,
    pub psk_order: usize,
    pub uplink_snr_db: f64,
    pub hybrid_method: Method,
    pub hybrid_betas: Vec<f64>,
}

/// `0, step, 2 step, ..., 1` without accumulated rounding.
pub fn unit_grid(steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

impl RawConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn resolve(self) -> Result<ExperimentConfig> {
        let experiment = self.experiment.ok_or_else(|| config_error("missing key `experiment`"))?;
        let snr_db = self.snr_db.unwrap_or(10.0);
        let snr_convention = match &self.snr_convention {
            Some(s) => SnrConvention::from_str(s)?,
            None => SnrConvention::TotalPilot,
        };
        let aoa_mode = match self.aoa.as_deref() {
            None if experiment == Experiment::RandomAoa => AoaMode::Random,
            None | Some("uniform") => AoaMode::UniformGrid,
            Some("random") => AoaMode::Random,
            Some(other) => return Err(config_error(format!("unknown aoa mode {other:?}"))),
        };
        let default_m = match experiment {
            Experiment::AsymptoticCheck => 500,
            _ => 120,
        };
        let gamma = match experiment {
            Experiment::ZeroFaults => 0.0,
            _ => self.gamma.unwrap_or(0.05),
        };
        let mut system = SystemConfig::from_snr_db(
            self.m.unwrap_or(default_m),
            self.k.unwrap_or(10),
            self.l.unwrap_or(10),
            self.p.unwrap_or(20),
            gamma,
            snr_db,
            snr_convention,
            self.seed.unwrap_or(0),
        );
        system.d_over_lambda = self.d_over_lambda.unwrap_or(0.3);
        system.aoa_mode = aoa_mode;

        let methods = match &self.methods {
            Some(names) => names.iter().map(|s| s.parse::<Method>()).collect::<std::result::Result<Vec<_>, _>>()?,
            None => Method::ALL.to_vec(),
        };
        let sweep = self.sweep.clone().unwrap_or_else(|| default_sweep(experiment));
        let ser_alphas = experiment == Experiment::SerVsM;
        let hybrid_method = match &self.hybrid_method {
            Some(s) => s.parse::<Method>()?,
            None => Method::ExAd,
        };
        let cfg = ExperimentConfig {
            experiment,
            system,
            snr_db,
            snr_convention,
            methods,
            baselines: self.baselines.unwrap_or(true),
            sweep,
            alpha_exad: self.alpha_exad.unwrap_or(if ser_alphas { 0.4 } else { 0.3 }),
            alpha_fsad: self.alpha_fsad.unwrap_or(if ser_alphas { 0.25 } else { 0.2 }),
            alpha_stpcp: self.alpha_stpcp.unwrap_or(if ser_alphas { 0.4 } else { 0.5 }),
            beta: if experiment == Experiment::ZeroFaults { f64::INFINITY } else { self.beta.unwrap_or(0.5) },
            grid_factors: self.grid_factors.clone().unwrap_or_else(|| {
                if experiment == Experiment::RandomAoa { vec![0.1, 1.0, 4.0] } else { vec![1.0] }
            }),
            outer_max_iters: self.outer_max_iters.unwrap_or(100),
            outer_tol: self.outer_tol.unwrap_or(1e-4),
            inner_max_iters: self.inner_max_iters,
            support_threshold: self.support_threshold.unwrap_or(0.1),
            support_floor_sigmas: self.support_floor_sigmas.unwrap_or(0.0),
            trials: self.trials.unwrap_or(10),
            seed: self.seed.unwrap_or(0),
            workers: self.workers.unwrap_or(0),
            out: self.out.clone().unwrap_or_else(|| PathBuf::from("results")),
            samples: self.samples.unwrap_or(match experiment {
                Experiment::AsymptoticCheck => 2000,
                _ => 10_000,
            }),
            psk_order: self.psk_order.unwrap_or(8),
            uplink_snr_db: self.uplink_snr_db.unwrap_or(snr_db),
            hybrid_method,
            hybrid_betas: self.hybrid_betas.clone().unwrap_or_else(|| vec![0.5]),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn default_sweep(experiment: Experiment) -> Vec<f64> {
    match experiment {
        Experiment::SweepAlpha | Experiment::ZeroFaults | Experiment::RandomAoa | Experiment::SweepBeta => {
            unit_grid(20)
        }
        Experiment::SweepP => vec![5.0, 10.0, 20.0, 40.0],
        Experiment::SerVsM => vec![60.0, 80.0, 100.0, 120.0],
        Experiment::AsymptoticCheck => vec![100.0, 200.0, 500.0],
        Experiment::HybridTune => (2..=10).map(|i| i as f64 / 20.0).collect(),
    }
}

fn as_count(v: f64, what: &str) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(config_error(format!("{what} sweep value {v} is not a positive integer")))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        RawConfig::from_toml(text)?.resolve()
    }

    pub fn load(path: &Path) -> Result<Self> {
        RawConfig::load(path)?.resolve()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweep.is_empty() {
            return Err(config_error("sweep grid is empty"));
        }
        if self.trials == 0 {
            return Err(config_error("trials must be at least 1"));
        }
        if self.sweep.iter().any(|v| !v.is_finite()) {
            return Err(config_error("sweep values must be finite"));
        }
        for (name, a) in [("alpha_exad", self.alpha_exad), ("alpha_fsad", self.alpha_fsad), ("alpha_stpcp", self.alpha_stpcp)] {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(config_error(format!("{name} = {a} must be finite and >= 0")));
            }
        }
        if !(self.beta >= 0.0) {
            return Err(config_error("beta must be >= 0"));
        }
        if self.grid_factors.is_empty() || self.grid_factors.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
            return Err(config_error("grid_factors must be a nonempty list of positive numbers"));
        }
        if self.samples == 0 {
            return Err(config_error("samples must be at least 1"));
        }
        if self.hybrid_betas.is_empty() || self.hybrid_betas.iter().any(|b| !(*b >= 0.0)) {
            return Err(config_error("hybrid_betas must be a nonempty list of values >= 0"));
        }
        if self.experiment == Experiment::HybridTune && self.hybrid_method == Method::StPcp {
            return Err(config_error("hybrid_method must be exAD or fsAD"));
        }
        match self.experiment {
            Experiment::SweepAlpha | Experiment::ZeroFaults | Experiment::RandomAoa | Experiment::HybridTune => {
                if self.sweep.iter().any(|a| *a < 0.0) {
                    return Err(config_error("alpha sweep values must be >= 0"));
                }
            }
            Experiment::SweepBeta => {
                if self.sweep.iter().any(|b| *b < 0.0) {
                    return Err(config_error("beta sweep values must be >= 0"));
                }
            }
            Experiment::SweepP | Experiment::SerVsM | Experiment::AsymptoticCheck => {
                for v in &self.sweep {
                    as_count(*v, self.experiment.sweep_name())?;
                }
            }
        }
        for v in &self.sweep {
            self.system_at(*v)?.validate()?;
        }
        atomic_mimo::receivers::Psk::new(self.psk_order)?;
        Ok(())
    }

    /// The system configuration used at one sweep value.
    pub fn system_at(&self, value: f64) -> Result<SystemConfig> {
        let mut sys = self.system.clone();
        match self.experiment {
            Experiment::SweepP => sys.p = as_count(value, "P")?,
            Experiment::SerVsM | Experiment::AsymptoticCheck => sys.m = as_count(value, "M")?,
            _ => {}
        }
        Ok(sys)
    }

    pub fn alpha_for(&self, method: Method) -> f64 {
        match method {
            Method::ExAd => self.alpha_exad,
            Method::FsAd => self.alpha_fsad,
            Method::StPcp => self.alpha_stpcp,
        }
    }

    /// Uplink symbol power for unit-variance receiver noise.
    pub fn uplink_rho(&self) -> f64 {
        10f64.powf(self.uplink_snr_db / 10.0)
    }
}
