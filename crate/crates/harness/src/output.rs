//! Per-trial CSV rows and their per-curve summaries.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use atomic_mimo::receivers::MeanAccumulator;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Outcome of one solver run as recorded in the `status` column.
pub const STATUS_OK: &str = "ok";
pub const STATUS_MAX_ITERS: &str = "max_iters";
pub const STATUS_FAILED: &str = "failed";

/// One (method, sweep value, trial) record. Field order is the CSV header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub method: String,
    pub sweep_value: f64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub trial: usize,
    pub seed: u64,
    pub normalized_error_db: Option<f64>,
    pub detection_error: Option<usize>,
    pub ser: Option<f64>,
    /// Mean `||x - x_hat||^2` over uplink symbols.
    pub mse: Option<f64>,
    pub mse_std_error: Option<f64>,
    /// Mean `||x - x_hat||` over uplink symbols.
    pub error_norm: Option<f64>,
    /// Closed-form prediction or tuning score, depending on the experiment.
    pub reference: Option<f64>,
    pub outer_iterations: Option<usize>,
    pub status: String,
    pub wall_time: f64,
}

impl ResultRow {
    pub fn new(experiment: &str, method: &str, sweep_value: f64, trial: usize, seed: u64) -> Self {
        ResultRow {
            experiment: experiment.to_string(),
            method: method.to_string(),
            sweep_value,
            alpha: None,
            beta: None,
            trial,
            seed,
            normalized_error_db: None,
            detection_error: None,
            ser: None,
            mse: None,
            mse_std_error: None,
            error_norm: None,
            reference: None,
            outer_iterations: None,
            status: STATUS_OK.to_string(),
            wall_time: 0.0,
        }
    }
}

/// Trial averages of one curve point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub method: String,
    pub sweep_value: f64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub trials: usize,
    pub failures: usize,
    pub mean_error_db: Option<f64>,
    pub std_error_db: Option<f64>,
    pub mean_detection_error: Option<f64>,
    pub mean_ser: Option<f64>,
    pub mean_mse: Option<f64>,
    /// Standard error of `mean_mse` across trials.
    pub mse_std_error: Option<f64>,
    pub mean_error_norm: Option<f64>,
    pub reference: Option<f64>,
    pub mean_wall_time: f64,
}

#[derive(Default)]
struct Group {
    first: usize,
    trials: usize,
    failures: usize,
    error: MeanAccumulator,
    detection: MeanAccumulator,
    ser: MeanAccumulator,
    mse: MeanAccumulator,
    norm: MeanAccumulator,
    reference: MeanAccumulator,
    wall: MeanAccumulator,
}

fn mean_of(acc: &MeanAccumulator) -> Option<f64> {
    (acc.count() > 0).then(|| acc.mean())
}

fn se_of(acc: &MeanAccumulator) -> Option<f64> {
    (acc.count() > 1).then(|| acc.std_error())
}

fn push_finite(acc: &mut MeanAccumulator, v: Option<f64>) {
    if let Some(x) = v.filter(|x| x.is_finite()) {
        acc.push(x);
    }
}

/// Groups rows by (method, sweep value, alpha, beta) in order of first
/// appearance and averages every metric over the trials that produced it.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut index: HashMap<(String, u64, Option<u64>, Option<u64>), usize> = HashMap::new();
    let mut groups: Vec<Group> = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let key = (r.method.clone(), r.sweep_value.to_bits(), r.alpha.map(f64::to_bits), r.beta.map(f64::to_bits));
        let g = *index.entry(key).or_insert_with(|| {
            groups.push(Group { first: i, ..Group::default() });
            groups.len() - 1
        });
        let g = &mut groups[g];
        g.trials += 1;
        if r.status != STATUS_OK {
            g.failures += 1;
        }
        push_finite(&mut g.error, r.normalized_error_db);
        push_finite(&mut g.detection, r.detection_error.map(|d| d as f64));
        push_finite(&mut g.ser, r.ser);
        push_finite(&mut g.mse, r.mse);
        push_finite(&mut g.norm, r.error_norm);
        push_finite(&mut g.reference, r.reference);
        g.wall.push(r.wall_time);
    }
    groups
        .iter()
        .map(|g| {
            let r = &rows[g.first];
            SummaryRow {
                experiment: r.experiment.clone(),
                method: r.method.clone(),
                sweep_value: r.sweep_value,
                alpha: r.alpha,
                beta: r.beta,
                trials: g.trials,
                failures: g.failures,
                mean_error_db: mean_of(&g.error),
                std_error_db: se_of(&g.error),
                mean_detection_error: mean_of(&g.detection),
                mean_ser: mean_of(&g.ser),
                mean_mse: mean_of(&g.mse),
                mse_std_error: se_of(&g.mse),
                mean_error_norm: mean_of(&g.norm),
                reference: mean_of(&g.reference),
                mean_wall_time: g.wall.mean(),
            }
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}
