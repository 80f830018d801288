//! The studies. Each one expands into independent jobs that rayon runs in
//! parallel; rows come back in job order so output never depends on the
//! worker count.

use std::path::{Path, PathBuf};
use std::time::Instant;

use atomic_mimo::metrics::symbol_error_rate;
use atomic_mimo::receivers::{asymptotic_excess_bound, asymptotic_mse_mrc, LinearReceiver, MeanAccumulator, Psk};
use atomic_mimo::model::FAULT_AMPLITUDE_FACTOR;
use atomic_mimo::solvers::Method;
use atomic_mimo::CMat;
use rayon::prelude::*;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{config_error, Result};
use crate::output::{summarize, write_csv, ResultRow, STATUS_FAILED};
use crate::trial::{for_each_uplink, record_estimate, run_estimator, support_indices, Estimate, Estimator, TrialData};

/// The fault-free oracle receivers of the SER study.
pub const PERFECT_CSI: &str = "PChn";
pub const PERFECT_CSI_ORACLE: &str = "PChn+O";
/// Rows added by the hybrid tuner next to its grid rows.
pub const HYBRID_SELECTED: &str = "hybrid";
pub const HYBRID_ORACLE: &str = "oracle";

/// The (alpha, beta) pair the hybrid procedure picked for one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridChoice {
    pub trial: usize,
    pub alpha: f64,
    pub beta: f64,
    /// `||H_hat - H_mmse||_F` at the chosen pair.
    pub distance: f64,
    pub fault_indices: Vec<usize>,
    pub ser: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub hybrid: Vec<HybridChoice>,
}

#[derive(Debug, Clone, Copy)]
enum Job {
    Estimation { value: f64, trial: usize, est: Estimator },
    Ser { value: f64, trial: usize, est: Option<Estimator>, oracle_support: bool },
    Asymptotic { value: f64, trial: usize },
    HybridPoint { trial: usize, alpha: f64, beta: f64 },
    HybridMmse { trial: usize },
}

/// Runs an experiment on a pool of `cfg.workers` threads (0 = all cores).
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
    pool.install(|| run_in_pool(cfg))
}

fn run_in_pool(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let jobs = plan(cfg);
    let rows: Vec<Vec<ResultRow>> = jobs.par_iter().map(|job| run_job(cfg, job)).collect::<Result<_>>()?;
    let mut rows: Vec<ResultRow> = rows.into_iter().flatten().collect();
    let mut hybrid = Vec::new();
    if cfg.experiment == Experiment::HybridTune {
        let (extra, choices) = select_hybrid(cfg, &rows)?;
        rows.extend(extra);
        hybrid = choices;
    }
    Ok(RunOutput { rows, hybrid })
}

fn plan(cfg: &ExperimentConfig) -> Vec<Job> {
    let mut jobs = Vec::new();
    match cfg.experiment {
        Experiment::SweepAlpha | Experiment::SweepP | Experiment::ZeroFaults | Experiment::RandomAoa | Experiment::SweepBeta => {
            let ests = Estimator::list(cfg);
            for &value in &cfg.sweep {
                for trial in 0..cfg.trials {
                    jobs.extend(ests.iter().map(|&est| Job::Estimation { value, trial, est }));
                }
            }
        }
        Experiment::SerVsM => {
            for &value in &cfg.sweep {
                for trial in 0..cfg.trials {
                    jobs.push(Job::Ser { value, trial, est: None, oracle_support: false });
                    jobs.push(Job::Ser { value, trial, est: None, oracle_support: true });
                    jobs.extend(
                        Estimator::list(cfg)
                            .into_iter()
                            .map(|est| Job::Ser { value, trial, est: Some(est), oracle_support: false }),
                    );
                }
            }
        }
        Experiment::AsymptoticCheck => {
            for &value in &cfg.sweep {
                jobs.extend((0..cfg.trials).map(|trial| Job::Asymptotic { value, trial }));
            }
        }
        Experiment::HybridTune => {
            for trial in 0..cfg.trials {
                jobs.push(Job::HybridMmse { trial });
                for &alpha in &cfg.sweep {
                    jobs.extend(cfg.hybrid_betas.iter().map(|&beta| Job::HybridPoint { trial, alpha, beta }));
                }
            }
        }
    }
    jobs
}

fn run_job(cfg: &ExperimentConfig, job: &Job) -> Result<Vec<ResultRow>> {
    match *job {
        Job::Estimation { value, trial, est } => estimation_row(cfg, value, trial, &est).map(|r| vec![r]),
        Job::Ser { value, trial, est, oracle_support } => ser_row(cfg, value, trial, est, oracle_support).map(|r| vec![r]),
        Job::Asymptotic { value, trial } => asymptotic_rows(cfg, value, trial),
        Job::HybridPoint { trial, alpha, beta } => hybrid_point(cfg, trial, alpha, beta).map(|r| vec![r]),
        Job::HybridMmse { trial } => {
            let data = TrialData::generate(&cfg.system, cfg.seed, trial)?;
            let est = run_estimator(cfg, &Estimator::Mmse, &data, 0.0, 0.0)?;
            let mut row = ResultRow::new(cfg.experiment.id(), "MMSE", 0.0, trial, cfg.seed);
            record_estimate(&mut row, &data, est.as_ref())?;
            if let Some(e) = &est {
                row.ser = zf_ser(cfg, &data, trial, &e.h_hat, &[])?;
            }
            Ok(vec![row])
        }
    }
}

/// Regularization scalars a method uses at one sweep value.
fn scalars(cfg: &ExperimentConfig, value: f64, method: Method) -> (f64, f64) {
    match cfg.experiment {
        Experiment::SweepAlpha | Experiment::ZeroFaults | Experiment::RandomAoa | Experiment::HybridTune => {
            (value, cfg.beta)
        }
        Experiment::SweepBeta => (cfg.alpha_for(method), value),
        _ => (cfg.alpha_for(method), cfg.beta),
    }
}

fn estimation_row(cfg: &ExperimentConfig, value: f64, trial: usize, est: &Estimator) -> Result<ResultRow> {
    let data = TrialData::generate(&cfg.system_at(value)?, cfg.seed, trial)?;
    let mut row = ResultRow::new(cfg.experiment.id(), &est.name(), value, trial, cfg.seed);
    let (alpha, beta) = match est.method() {
        Some(m) => {
            let (a, b) = scalars(cfg, value, m);
            row.alpha = Some(a);
            row.beta = Some(b);
            (a, b)
        }
        None => (0.0, 0.0),
    };
    let e = run_estimator(cfg, est, &data, alpha, beta)?;
    record_estimate(&mut row, &data, e.as_ref())?;
    Ok(row)
}

/// Symbol error rate of ZF on the kept antennas over the trial's uplink
/// symbols; `None` when the receiver cannot be formed.
fn zf_ser(cfg: &ExperimentConfig, data: &TrialData, trial: usize, h: &CMat, omega: &[usize]) -> Result<Option<f64>> {
    let rho = cfg.uplink_rho();
    let rx = match LinearReceiver::zf(h, rho, omega) {
        Ok(rx) => rx,
        Err(e) => {
            eprintln!("warning: ZF receiver unavailable ({e})");
            return Ok(None);
        }
    };
    let psk = Psk::new(cfg.psk_order)?;
    let mut decisions = Vec::with_capacity(cfg.samples * data.system.k);
    let mut truth = Vec::with_capacity(cfg.samples * data.system.k);
    for_each_uplink(data, rho, cfg.samples, cfg.psk_order, cfg.seed, trial, |s| {
        let r = rx.detect(&s.y, &psk, None)?;
        decisions.extend(r.decisions);
        truth.extend_from_slice(&s.symbols);
        Ok(())
    })?;
    Ok(Some(symbol_error_rate(&decisions, &truth)?))
}

fn ser_row(cfg: &ExperimentConfig, value: f64, trial: usize, est: Option<Estimator>, oracle_support: bool) -> Result<ResultRow> {
    let data = TrialData::generate(&cfg.system_at(value)?, cfg.seed, trial)?;
    let name = match (&est, oracle_support) {
        (Some(e), _) => e.name(),
        (None, false) => PERFECT_CSI.to_string(),
        (None, true) => PERFECT_CSI_ORACLE.to_string(),
    };
    let mut row = ResultRow::new(cfg.experiment.id(), &name, value, trial, cfg.seed);
    let (h, omega): (CMat, Vec<usize>) = match &est {
        None => {
            row.normalized_error_db = None;
            let omega = if oracle_support { data.faults.support.clone() } else { Vec::new() };
            (data.channel.h.clone(), omega)
        }
        Some(est) => {
            let (alpha, beta) = match est.method() {
                Some(m) => {
                    let (a, b) = scalars(cfg, value, m);
                    row.alpha = Some(a);
                    row.beta = Some(b);
                    (a, b)
                }
                None => (0.0, 0.0),
            };
            let e = run_estimator(cfg, est, &data, alpha, beta)?;
            record_estimate(&mut row, &data, e.as_ref())?;
            match e {
                // estimators that locate faults get the modified receiver
                Some(Estimate { h_hat, support, .. }) => {
                    let omega = support.as_deref().map(support_indices).unwrap_or_default();
                    (h_hat, omega)
                }
                None => return Ok(row),
            }
        }
    };
    row.ser = zf_ser(cfg, &data, trial, &h, &omega)?;
    if row.ser.is_none() {
        row.status = STATUS_FAILED.to_string();
    }
    Ok(row)
}

/// Perfect-CSI receiver errors at one array size: conventional and modified
/// MRC/ZF plus the paired MRC excess.
fn asymptotic_rows(cfg: &ExperimentConfig, value: f64, trial: usize) -> Result<Vec<ResultRow>> {
    let system = cfg.system_at(value)?;
    let data = TrialData::generate(&system, cfg.seed, trial)?;
    let rho = cfg.uplink_rho();
    let h = &data.channel.h;
    let omega = &data.faults.support;
    let start = Instant::now();
    let receivers = [
        ("MRC", LinearReceiver::mrc(h, rho, &[])?),
        ("MRC-mod", LinearReceiver::mrc(h, rho, omega)?),
        ("ZF", LinearReceiver::zf(h, rho, &[])?),
        ("ZF-mod", LinearReceiver::zf(h, rho, omega)?),
    ];
    let mut sq: Vec<MeanAccumulator> = vec![MeanAccumulator::default(); receivers.len()];
    let mut norm: Vec<MeanAccumulator> = vec![MeanAccumulator::default(); receivers.len()];
    let mut gap = MeanAccumulator::default();
    for_each_uplink(&data, rho, cfg.samples, cfg.psk_order, cfg.seed, trial, |s| {
        let mut e2 = [0.0; 4];
        for (i, (_, rx)) in receivers.iter().enumerate() {
            e2[i] = (&s.x - rx.apply(&s.y)?).norm_squared();
            sq[i].push(e2[i]);
            norm[i].push(e2[i].sqrt());
        }
        gap.push(e2[0] - e2[1]);
        Ok(())
    })?;
    let wall = start.elapsed().as_secs_f64();
    let limit = asymptotic_mse_mrc(system.k, system.p)?;
    let w_inf = FAULT_AMPLITUDE_FACTOR * rho.sqrt();
    let bound = asymptotic_excess_bound(system.k, system.gamma, rho, w_inf)?;
    let id = cfg.experiment.id();
    let mut rows: Vec<ResultRow> = receivers
        .iter()
        .enumerate()
        .map(|(i, (name, _))| {
            let mut r = ResultRow::new(id, name, value, trial, cfg.seed);
            r.mse = Some(sq[i].mean());
            r.mse_std_error = Some(sq[i].std_error());
            r.error_norm = Some(norm[i].mean());
            if i < 2 {
                r.reference = Some(limit);
            }
            r.wall_time = wall;
            r
        })
        .collect();
    let mut r = ResultRow::new(id, "MRC-gap", value, trial, cfg.seed);
    r.mse = Some(gap.mean());
    r.mse_std_error = Some(gap.std_error());
    r.reference = Some(bound);
    r.wall_time = wall;
    rows.push(r);
    Ok(rows)
}

fn hybrid_point(cfg: &ExperimentConfig, trial: usize, alpha: f64, beta: f64) -> Result<ResultRow> {
    let data = TrialData::generate(&cfg.system, cfg.seed, trial)?;
    let method = cfg.hybrid_method;
    let est = Estimator::Solver { method, grid_factor: cfg.grid_factors[0] };
    let mut row = ResultRow::new(cfg.experiment.id(), &est.name(), alpha, trial, cfg.seed);
    row.alpha = Some(alpha);
    row.beta = Some(beta);
    let e = run_estimator(cfg, &est, &data, alpha, beta)?;
    record_estimate(&mut row, &data, e.as_ref())?;
    if let Some(e) = &e {
        let mmse = run_estimator(cfg, &Estimator::Mmse, &data, 0.0, 0.0)?
            .ok_or_else(|| config_error("MMSE reference unavailable"))?;
        row.reference = Some((&e.h_hat - &mmse.h_hat).norm());
        let omega = e.support.as_deref().map(support_indices).unwrap_or_default();
        row.ser = zf_ser(cfg, &data, trial, &e.h_hat, &omega)?;
    }
    Ok(row)
}

/// Per trial, picks the grid point closest to the MMSE estimate (first one
/// on ties) and, for comparison, the grid point with the lowest SER.
fn select_hybrid(cfg: &ExperimentConfig, rows: &[ResultRow]) -> Result<(Vec<ResultRow>, Vec<HybridChoice>)> {
    let grid_name = Estimator::Solver { method: cfg.hybrid_method, grid_factor: cfg.grid_factors[0] }.name();
    let mut extra = Vec::new();
    let mut choices = Vec::new();
    for trial in 0..cfg.trials {
        let grid: Vec<&ResultRow> = rows.iter().filter(|r| r.trial == trial && r.method == grid_name).collect();
        let by = |key: fn(&ResultRow) -> Option<f64>| {
            grid.iter().copied().filter(|r| key(r).is_some_and(f64::is_finite)).fold(None, |best: Option<&ResultRow>, r| match best {
                Some(b) if key(b) <= key(r) => Some(b),
                _ => Some(r),
            })
        };
        let Some(pick) = by(|r| r.reference) else {
            eprintln!("warning: no usable grid point in trial {trial}");
            continue;
        };
        let data = TrialData::generate(&cfg.system, cfg.seed, trial)?;
        let est = Estimator::Solver { method: cfg.hybrid_method, grid_factor: cfg.grid_factors[0] };
        let alpha = pick.alpha.unwrap_or(0.0);
        let beta = pick.beta.unwrap_or(0.0);
        let e = run_estimator(cfg, &est, &data, alpha, beta)?;
        let fault_indices = e.as_ref().and_then(|e| e.support.as_deref()).map(support_indices).unwrap_or_default();
        choices.push(HybridChoice { trial, alpha, beta, distance: pick.reference.unwrap_or(f64::NAN), fault_indices, ser: pick.ser });
        for (name, src) in [(HYBRID_SELECTED, Some(pick)), (HYBRID_ORACLE, by(|r| r.ser))] {
            if let Some(src) = src {
                let mut r = src.clone();
                r.method = name.to_string();
                extra.push(r);
            }
        }
    }
    Ok((extra, choices))
}

/// Writes `<experiment>.csv` and `<experiment>_summary.csv` under `dir`.
pub fn write_outputs(cfg: &ExperimentConfig, out: &RunOutput, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let id = cfg.experiment.id();
    let rows_path = dir.join(format!("{id}.csv"));
    let summary_path = dir.join(format!("{id}_summary.csv"));
    write_csv(&rows_path, &out.rows)?;
    write_csv(&summary_path, &summarize(&out.rows))?;
    Ok((rows_path, summary_path))
}
