//! F1 metric, experiment orchestration, hyperparameter sweeps, and
//! machine-readable reports.

mod gradcheck_report;
mod runner;
mod sweep;

pub use gradcheck_report::{gradcheck_report, FamilyGradError, GradCheckReport, GRADCHECK_THRESHOLD};
pub use runner::{dataset_hash, run_experiment, DataSource, MethodStats, RunReport, SeedResult};
pub use sweep::{sweep, SweepAxis, SweepRow};

use thiserror::Error;

use crate::graph::DatasetError;
use crate::model::ModelError;
use crate::trainer::TrainError;

#[derive(Error, Debug)]
pub enum EvalError {
    #[error("f1_score: length mismatch, {predictions} predictions vs {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("f1_score: empty input")]
    Empty,
    #[error("sweep needs at least 2 axis values, got {0}")]
    TooFewValues(usize),
    #[error("sweep axis value {0} appears more than once")]
    DuplicateValue(f64),
    #[error("training failed for seed {seed}: {source}")]
    Training {
        seed: u64,
        #[source]
        source: TrainError,
    },
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    GraphData(#[from] crate::graph::GraphError),
    #[error(transparent)]
    Tensor(#[from] crate::tensor::TensorError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("report encoding: {0}")]
    Json(#[from] serde_json::Error),
    #[error("gradient check failed: {0}")]
    GradCheckFailed(String),
}

/// F1 of the positive class: harmonic mean of precision and recall, `0` by
/// convention when `precision + recall = 0`.
pub fn f1_score(predictions: &[bool], labels: &[bool]) -> Result<f64, EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(f1_score_unchecked(predictions, labels))
}

/// F1 without the argument checks; for internal callers that already hold
/// aligned non-empty vectors.
pub(crate) fn f1_score_unchecked(predictions: &[bool], labels: &[bool]) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        // precision + recall can only be zero when there are no true
        // positives at all
        return 0.0;
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    2.0 * precision * recall / (precision + recall)
}
