//! Seeded Monte-Carlo studies for the `atomic-mimo` estimators.
//!
//! A study is described by a flat TOML file ([`config`]), expanded into
//! independent (sweep value, trial, method) jobs ([`experiments`]) and
//! written as per-trial and averaged CSV tables ([`output`]).

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod trial;

pub use config::{Experiment, ExperimentConfig, RawConfig};
pub use error::{HarnessError, Result};
pub use experiments::{run, write_outputs, HybridChoice, RunOutput};
pub use output::{summarize, ResultRow, SummaryRow};
