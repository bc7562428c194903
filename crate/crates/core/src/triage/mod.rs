//! LVEF triage rule, classification metrics, precision-constrained cutoff
//! calibration and the workload simulator.

mod calibrate;
mod metrics;
mod rules;
mod workload;

use thiserror::Error;

pub use calibrate::{
    calibrate_cutoff, cohort_pairs, evaluate_cutoff, load_cohort, read_cohort_csv, write_cohort_csv, CalibrationResult,
    CohortEntry, OperatingPoint,
};
pub use metrics::{metrics, Confusion, Metrics};
pub use rules::{triage, Category, ThresholdConfig, TriageDecision};
pub use workload::{workload_savings, WorkloadParams};

#[derive(Debug, Error, PartialEq)]
pub enum TriageError {
    #[error("LVEF {0} is outside [0, 100]")]
    InvalidLvef(f64),
    #[error("invalid thresholds: need 0 < abnormal_below ({abnormal_below}) <= normal_above ({normal_above}) < 100")]
    InvalidThresholds { abnormal_below: f64, normal_above: f64 },
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("no predictions given")]
    EmptyInput,
    #[error("cohort must contain both normal and non-normal studies")]
    SingleClassCohort,
    #[error("precision floor {0} is outside [0, 1]")]
    InvalidPrecisionFloor(f64),
    #[error("cutoff {0} is not a finite number")]
    InvalidCutoff(f64),
    #[error("invalid workload parameters {0:?}")]
    InvalidWorkload(WorkloadParams),
    #[error("cohort CSV line {line}: {reason}")]
    CohortFormat { line: usize, reason: String },
}
