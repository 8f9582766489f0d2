use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::trainer::TrainConfig;

use super::runner::{run_experiment, write_atomic, DataSource};
use super::EvalError;

/// Hyperparameter axes mirroring the sensitivity protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    DimZy,
    Delta,
    PDrop,
    PAdd,
    Gamma,
    Alpha,
    Omega,
}

impl SweepAxis {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "dim_zy" => Some(SweepAxis::DimZy),
            "delta" => Some(SweepAxis::Delta),
            "p_drop" => Some(SweepAxis::PDrop),
            "p_add" => Some(SweepAxis::PAdd),
            "gamma" => Some(SweepAxis::Gamma),
            "alpha" => Some(SweepAxis::Alpha),
            "omega" => Some(SweepAxis::Omega),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::DimZy => "dim_zy",
            SweepAxis::Delta => "delta",
            SweepAxis::PDrop => "p_drop",
            SweepAxis::PAdd => "p_add",
            SweepAxis::Gamma => "gamma",
            SweepAxis::Alpha => "alpha",
            SweepAxis::Omega => "omega",
        }
    }

    fn apply(self, cfg: &mut TrainConfig, value: f64) {
        match self {
            SweepAxis::DimZy => cfg.k_y = value as usize,
            SweepAxis::Delta => cfg.delta = value,
            SweepAxis::PDrop => cfg.p_drop = value,
            SweepAxis::PAdd => cfg.p_add = value,
            SweepAxis::Gamma => cfg.gamma = value,
            SweepAxis::Alpha => cfg.alpha = value,
            SweepAxis::Omega => cfg.omega = value,
        }
    }
}

/// One grid point: axis value, mean target-test F1, population std.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub mean_f1: f64,
    pub std_f1: f64,
}

/// Run one experiment per axis value and emit a plottable CSV grid
/// (`sweep_<axis>.csv` in `out_dir`).
pub fn sweep(
    axis: SweepAxis,
    values: &[f64],
    data: &DataSource,
    base_cfg: &TrainConfig,
    seeds: &[u64],
    out_dir: &Path,
) -> Result<Vec<SweepRow>, EvalError> {
    if values.len() < 2 {
        return Err(EvalError::TooFewValues(values.len()));
    }
    for (i, &v) in values.iter().enumerate() {
        if values[..i].contains(&v) {
            return Err(EvalError::DuplicateValue(v));
        }
    }
    std::fs::create_dir_all(out_dir).map_err(|source| EvalError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;

    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let mut cfg = base_cfg.clone();
        axis.apply(&mut cfg, value);
        let point_dir = out_dir.join(format!("{}_{}", axis.name(), value));
        let report = run_experiment(data, &cfg, seeds, &point_dir)?;
        rows.push(SweepRow {
            value,
            mean_f1: report.dgda.mean,
            std_f1: report.dgda.std,
        });
    }

    let mut csv = String::from("value,mean_f1,std_f1\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{}\n", r.value, r.mean_f1, r.std_f1));
    }
    write_atomic(&out_dir.join(format!("sweep_{}.csv", axis.name())), &csv)?;
    Ok(rows)
}
