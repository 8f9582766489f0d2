use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::graph::{
    dataset_to_jsonl, generate_synthetic_pair, load_dataset, DatasetSplit, GeneratorConfig,
    DEFAULT_FEATURE_SPEC,
};
use crate::trainer::{
    evaluate_baseline, evaluate_dgda, trace_csv, train, train_baseline, BaselineMode,
    BaselineTrace, TrainConfig,
};

use super::EvalError;

/// Where the benchmark data comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// A JSON Lines dataset on disk.
    Path(PathBuf),
    /// Generate synthetically with the given config.
    Generator(Box<GeneratorConfig>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub dgda_f1: f64,
    pub source_only_f1: f64,
    pub target_supervised_f1: f64,
    pub dgda_trace: String,
    pub source_only_trace: String,
    pub target_supervised_trace: String,
}

/// Mean and population standard deviation over seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodStats {
    pub mean: f64,
    pub std: f64,
}

impl MethodStats {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        MethodStats { mean, std: var.sqrt() }
    }
}

/// Machine-readable experiment record: config snapshot, per-seed F1 for
/// DGDA and both baselines, aggregate stats, trace file names, and the
/// dataset content hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub train_config: TrainConfig,
    pub generator_config: Option<GeneratorConfig>,
    pub data_path: Option<String>,
    pub dataset_hash: String,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<SeedResult>,
    pub dgda: MethodStats,
    pub source_only: MethodStats,
    pub target_supervised: MethodStats,
    /// Set when any reported F1 hit the zero-denominator convention.
    pub f1_zero_denominator_flagged: bool,
}

/// SHA-256 of the dataset's canonical JSON Lines form.
pub fn dataset_hash(split: &DatasetSplit) -> Result<String, EvalError> {
    let text = dataset_to_jsonl(split)?;
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    Ok(hex_string(&hasher.finalize()))
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn write_atomic(path: &Path, contents: &str) -> Result<(), EvalError> {
    let io_err = |source| EvalError::Io { path: path.display().to_string(), source };
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)?;
    Ok(())
}

pub(crate) fn obtain_split(data: &DataSource) -> Result<DatasetSplit, EvalError> {
    match data {
        DataSource::Path(path) => Ok(load_dataset(path)?),
        DataSource::Generator(cfg) => Ok(generate_synthetic_pair(cfg, cfg.seed)?),
    }
}

fn baseline_trace_csv(traces: &[BaselineTrace], deterministic: bool) -> String {
    let mut out = String::from("epoch,loss,val_f1,seconds\n");
    for t in traces {
        let seconds = if deterministic { 0.0 } else { t.seconds };
        out.push_str(&format!("{},{},{},{}\n", t.epoch, t.loss, t.val_f1, seconds));
    }
    out
}

/// Train DGDA and both baselines for every seed, evaluate on target-test,
/// and write `report.json` plus per-seed trace CSVs into `out_dir`.
///
/// Trace CSVs written here zero the wall-clock column so repeated runs with
/// identical seeds and data produce byte-identical artifacts.
pub fn run_experiment(
    data: &DataSource,
    cfg: &TrainConfig,
    seeds: &[u64],
    out_dir: &Path,
) -> Result<RunReport, EvalError> {
    std::fs::create_dir_all(out_dir).map_err(|source| EvalError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let mut split = obtain_split(data)?;
    let hash = dataset_hash(&split)?;
    if let DataSource::Generator(_) = data {
        write_atomic(&out_dir.join("dataset.jsonl"), &dataset_to_jsonl(&split)?)?;
    }
    split.prepare_features(&DEFAULT_FEATURE_SPEC)?;

    let mut per_seed = Vec::with_capacity(seeds.len());
    for &s in seeds {
        let mut run_cfg = cfg.clone();
        run_cfg.master_seed = s;
        let seed_err = |source| EvalError::Training { seed: s, source };

        let (dgda_params, dgda_trace) = train(&split, run_cfg.clone()).map_err(seed_err)?;
        let dgda_f1 = evaluate_dgda(&dgda_params, &split.target_test).map_err(seed_err)?;

        let (src_params, src_trace) =
            train_baseline(&split, &run_cfg, BaselineMode::SourceOnly).map_err(seed_err)?;
        let source_only_f1 =
            evaluate_baseline(&src_params, &split.target_test).map_err(seed_err)?;

        let (tgt_params, tgt_trace) =
            train_baseline(&split, &run_cfg, BaselineMode::TargetSupervised).map_err(seed_err)?;
        let target_supervised_f1 =
            evaluate_baseline(&tgt_params, &split.target_test).map_err(seed_err)?;

        let dgda_name = format!("trace_dgda_seed{s}.csv");
        let src_name = format!("trace_source_only_seed{s}.csv");
        let tgt_name = format!("trace_target_supervised_seed{s}.csv");
        write_atomic(&out_dir.join(&dgda_name), &trace_csv(&dgda_trace, true))?;
        write_atomic(&out_dir.join(&src_name), &baseline_trace_csv(&src_trace, true))?;
        write_atomic(&out_dir.join(&tgt_name), &baseline_trace_csv(&tgt_trace, true))?;

        per_seed.push(SeedResult {
            seed: s,
            dgda_f1,
            source_only_f1,
            target_supervised_f1,
            dgda_trace: dgda_name,
            source_only_trace: src_name,
            target_supervised_trace: tgt_name,
        });
    }

    let collect = |f: fn(&SeedResult) -> f64| -> Vec<f64> { per_seed.iter().map(f).collect() };
    let dgda_values = collect(|r| r.dgda_f1);
    let src_values = collect(|r| r.source_only_f1);
    let tgt_values = collect(|r| r.target_supervised_f1);
    let flagged = per_seed.iter().any(|r| {
        r.dgda_f1 == 0.0 || r.source_only_f1 == 0.0 || r.target_supervised_f1 == 0.0
    });

    let report = RunReport {
        train_config: cfg.clone(),
        generator_config: match data {
            DataSource::Generator(g) => Some((**g).clone()),
            DataSource::Path(_) => None,
        },
        data_path: match data {
            DataSource::Path(p) => Some(p.display().to_string()),
            DataSource::Generator(_) => None,
        },
        dataset_hash: hash,
        seeds: seeds.to_vec(),
        per_seed,
        dgda: MethodStats::from_values(&dgda_values),
        source_only: MethodStats::from_values(&src_values),
        target_supervised: MethodStats::from_values(&tgt_values),
        f1_zero_denominator_flagged: flagged,
    };
    write_atomic(
        &out_dir.join("report.json"),
        &serde_json::to_string_pretty(&report)?,
    )?;
    Ok(report)
}
