//! Seeded per-trial data and the estimators compared by every study.

use std::time::Instant;

use atomic_mimo::baselines::{estimate_ls, estimate_ls_sls, estimate_mmse};
use atomic_mimo::metrics::{detection_error, normalized_error_db};
use atomic_mimo::model::{
    decorrelate, make_pilot, sample_channel, sample_fault_pattern, simulate_training, simulate_uplink, substream,
    ChannelRealization, FaultPattern, Observation, SystemConfig, TrainingBlock, UplinkSample,
};
use atomic_mimo::solvers::{decompose, Method, SolverParams};
use atomic_mimo::CMat;
use rand_chacha::ChaCha20Rng;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output::{ResultRow, STATUS_FAILED, STATUS_MAX_ITERS, STATUS_OK};

/// Uplink draws use streams offset by this much from the training streams.
const UPLINK_STREAM: u64 = 1 << 32;

/// Everything drawn for one trial of the training phase.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub system: SystemConfig,
    pub channel: ChannelRealization,
    pub faults: FaultPattern,
    pub block: TrainingBlock,
    pub obs: Observation,
}

impl TrialData {
    /// Draws channel, faults and training noise from stream `trial` of `seed`.
    pub fn generate(system: &SystemConfig, seed: u64, trial: usize) -> Result<Self> {
        let mut rng = substream(seed, trial as u64);
        let channel = sample_channel(system, &mut rng)?;
        let faults = sample_fault_pattern(system, &mut rng)?;
        let pilot = make_pilot(system.k, system.l)?;
        let block = simulate_training(&channel, &pilot, &faults, system, &mut rng)?;
        let obs = decorrelate(&block, system);
        Ok(TrialData { system: system.clone(), channel, faults, block, obs })
    }

    pub fn truth_support(&self) -> Vec<bool> {
        self.faults.indicator(self.system.m)
    }
}

/// Random stream for the uplink symbols of one trial, independent of training.
pub fn uplink_rng(seed: u64, trial: usize) -> ChaCha20Rng {
    substream(seed, UPLINK_STREAM + trial as u64)
}

/// Streams `count` uplink symbols without holding them all in memory.
pub fn for_each_uplink(
    data: &TrialData,
    rho: f64,
    count: usize,
    psk_order: usize,
    seed: u64,
    trial: usize,
    mut f: impl FnMut(&UplinkSample) -> Result<()>,
) -> Result<()> {
    let mut rng = uplink_rng(seed, trial);
    for _ in 0..count {
        // one draw at a time consumes the stream exactly as a batch draw would
        let s = simulate_uplink(&data.channel, &data.faults, rho, 1, psk_order, &mut rng)?;
        f(&s[0])?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    Ls,
    LsSls,
    Mmse,
    Solver { method: Method, grid_factor: f64 },
}

impl Estimator {
    pub fn name(&self) -> String {
        match self {
            Estimator::Ls => "LS".into(),
            Estimator::LsSls => "LS-SLS".into(),
            Estimator::Mmse => "MMSE".into(),
            Estimator::Solver { method: Method::FsAd, grid_factor } if *grid_factor != 1.0 => {
                format!("fsAD(N={grid_factor}MK)")
            }
            Estimator::Solver { method, .. } => method.name().into(),
        }
    }

    pub fn method(&self) -> Option<Method> {
        match self {
            Estimator::Solver { method, .. } => Some(*method),
            _ => None,
        }
    }

    /// Baselines (if enabled) followed by each configured solver; fsAD once
    /// per grid factor.
    pub fn list(cfg: &ExperimentConfig) -> Vec<Estimator> {
        let mut out = Vec::new();
        if cfg.baselines {
            out.extend([Estimator::Ls, Estimator::LsSls, Estimator::Mmse]);
        }
        for &method in &cfg.methods {
            if method == Method::FsAd {
                out.extend(cfg.grid_factors.iter().map(|&grid_factor| Estimator::Solver { method, grid_factor }));
            } else {
                out.push(Estimator::Solver { method, grid_factor: 1.0 });
            }
        }
        out
    }
}

/// fsAD grid size `round(factor M K)`, at least one point.
pub fn grid_size(factor: f64, m: usize, k: usize) -> usize {
    ((factor * (m * k) as f64).round() as usize).max(1)
}

pub fn solver_params(cfg: &ExperimentConfig, method: Method, alpha: f64, beta: f64, grid_factor: f64, m: usize, k: usize) -> SolverParams {
    let mut p = SolverParams::new(method, alpha, beta);
    if method == Method::FsAd {
        p = p.with_grid(grid_size(grid_factor, m, k));
    }
    p.outer.max_iters = cfg.outer_max_iters;
    p.outer.tol_primal = cfg.outer_tol;
    p.outer.tol_dual = cfg.outer_tol;
    if let (Some(n), false) = (cfg.inner_max_iters, method == Method::StPcp) {
        p.inner.max_iters = n;
    }
    p.support_threshold_rel = cfg.support_threshold;
    p.support_floor_sigmas = cfg.support_floor_sigmas;
    p
}

/// A channel estimate plus whatever the estimator knows about faults.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub h_hat: CMat,
    pub support: Option<Vec<bool>>,
    pub outer_iterations: Option<usize>,
    pub status: &'static str,
    pub wall_time: f64,
}

/// Runs one estimator. Solver failures come back as a `failed` estimate
/// rather than an error so a sweep never aborts on a single cell.
pub fn run_estimator(
    cfg: &ExperimentConfig,
    est: &Estimator,
    data: &TrialData,
    alpha: f64,
    beta: f64,
) -> Result<Option<Estimate>> {
    let TrialData { system, block, obs, channel, .. } = data;
    let start = Instant::now();
    let (h_hat, support, outer_iterations, status) = match est {
        Estimator::Ls => (estimate_ls(&block.y, &block.x)?, None, None, STATUS_OK),
        Estimator::LsSls => (estimate_ls_sls(&block.y, &block.x, system.sigma2)?, None, None, STATUS_OK),
        Estimator::Mmse => (estimate_mmse(&block.y, &block.x, &channel.a)?, None, None, STATUS_OK),
        Estimator::Solver { method, grid_factor } => {
            let params = solver_params(cfg, *method, alpha, beta, *grid_factor, system.m, system.k);
            match decompose(obs, &params) {
                Ok(r) => {
                    let status = if r.converged { STATUS_OK } else { STATUS_MAX_ITERS };
                    (r.h_hat, Some(r.detected_support), Some(r.outer_iterations), status)
                }
                Err(e) => {
                    eprintln!("warning: {} (alpha {alpha}, beta {beta}) failed: {e}", est.name());
                    return Ok(None);
                }
            }
        }
    };
    Ok(Some(Estimate { h_hat, support, outer_iterations, status, wall_time: start.elapsed().as_secs_f64() }))
}

/// Fills the estimation columns of `row` from an estimate (or marks it failed).
pub fn record_estimate(row: &mut ResultRow, data: &TrialData, est: Option<&Estimate>) -> Result<()> {
    match est {
        Some(e) => {
            row.normalized_error_db = Some(normalized_error_db(&data.channel.h, &e.h_hat)?);
            if let Some(s) = &e.support {
                row.detection_error = Some(detection_error(&data.truth_support(), s)?);
            }
            row.outer_iterations = e.outer_iterations;
            row.status = e.status.to_string();
            row.wall_time = e.wall_time;
        }
        None => row.status = STATUS_FAILED.to_string(),
    }
    Ok(())
}

pub fn support_indices(s: &[bool]) -> Vec<usize> {
    s.iter().enumerate().filter(|(_, f)| **f).map(|(i, _)| i).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use atomic_mimo::model::SnrConvention;

    #[test]
    fn trial_data_depends_only_on_seed_and_trial() {
        let sys = SystemConfig::from_snr_db(16, 4, 4, 6, 0.1, 10.0, SnrConvention::TotalPilot, 0);
        let a = TrialData::generate(&sys, 5, 2).unwrap();
        let b = TrialData::generate(&sys, 5, 2).unwrap();
        let c = TrialData::generate(&sys, 5, 3).unwrap();
        assert_eq!(a.obs, b.obs);
        assert_ne!(a.obs, c.obs);
        assert_eq!(a.faults.len(), 1);
    }

    #[test]
    fn streamed_uplink_matches_batch() {
        let sys = SystemConfig::from_snr_db(12, 3, 3, 4, 0.1, 10.0, SnrConvention::TotalPilot, 0);
        let d = TrialData::generate(&sys, 1, 0).unwrap();
        let batch = simulate_uplink(&d.channel, &d.faults, 2.0, 5, 4, &mut uplink_rng(1, 0)).unwrap();
        let mut streamed = Vec::new();
        for_each_uplink(&d, 2.0, 5, 4, 1, 0, |s| {
            streamed.push(s.clone());
            Ok(())
        })
        .unwrap();
        assert_eq!(batch, streamed);
    }

    #[test]
    fn estimator_names() {
        let fs = |f| Estimator::Solver { method: Method::FsAd, grid_factor: f }.name();
        assert_eq!(fs(1.0), "fsAD");
        assert_eq!(fs(0.1), "fsAD(N=0.1MK)");
        assert_eq!(fs(4.0), "fsAD(N=4MK)");
        assert_eq!(grid_size(0.1, 120, 10), 120);
        assert_eq!(grid_size(1e-9, 4, 2), 1);
    }
}
