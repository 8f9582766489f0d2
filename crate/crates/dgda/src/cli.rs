//! Command-line interface: dataset generation, training, evaluation,
//! multi-seed experiment runs, hyperparameter sweeps, and the gradient
//! check.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/config validation error,
//! 3 numeric failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::eval::{
    dataset_hash, f1_score, gradcheck_report, run_experiment, sweep, DataSource, EvalError,
    SweepAxis,
};
use crate::graph::{
    generate_synthetic_pair, load_dataset, save_dataset, DatasetSplit, GeneratorConfig,
    DEFAULT_FEATURE_SPEC,
};
use crate::model::predict;
use crate::trainer::{load_params, trace_csv, TrainConfig, TrainError};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

/// Seed override honored by every subcommand that consumes a config seed.
pub const SEED_ENV_VAR: &str = "DGDA_SEED";

#[derive(Parser)]
#[command(name = "dgda", about = "Generative graph domain adaptation toolkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic domain-shift dataset.
    Generate {
        /// Generator config JSON.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (dataset.jsonl + generator_config.json).
        #[arg(long)]
        out: PathBuf,
    },
    /// Train DGDA on a dataset and write a checkpoint plus trace CSV.
    Train {
        /// Dataset directory (containing dataset.jsonl) or a .jsonl file.
        #[arg(long)]
        data: PathBuf,
        /// Train config JSON.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Master seed override (beats DGDA_SEED and the config value).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a checkpoint on a dataset's test splits.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint file written by `train`.
        #[arg(long)]
        params: PathBuf,
    },
    /// Train DGDA and both baselines over several seeds; write a report.
    Run {
        /// Dataset directory or .jsonl file.
        #[arg(long, conflicts_with = "gen")]
        data: Option<PathBuf>,
        /// Generator config JSON (generate instead of loading).
        #[arg(long)]
        gen: Option<PathBuf>,
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated seed list.
        #[arg(long, default_value = "1,2,3")]
        seeds: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep one hyperparameter axis over a value grid.
    Sweep {
        /// One of: dim_zy, delta, p_drop, p_add, gamma, alpha, omega.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long)]
        values: String,
        #[arg(long, conflicts_with = "gen")]
        data: Option<PathBuf>,
        #[arg(long)]
        gen: Option<PathBuf>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "1,2,3")]
        seeds: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference check of the total-loss gradients, per parameter
    /// family.
    Gradcheck {
        #[arg(long)]
        seed: Option<u64>,
        /// Optional train config (loss weights and KL reduction).
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => m,
        }
    }
}

fn classify_train_error(e: TrainError) -> CliError {
    match e {
        TrainError::NonFiniteLoss { .. } => CliError::Numeric(e.to_string()),
        other => CliError::Data(other.to_string()),
    }
}

fn classify_eval_error(e: EvalError) -> CliError {
    match e {
        EvalError::Training { ref source, .. } => match source {
            TrainError::NonFiniteLoss { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        },
        EvalError::GradCheckFailed(_) => CliError::Numeric(e.to_string()),
        EvalError::TooFewValues(_) | EvalError::DuplicateValue(_) => CliError::Usage(e.to_string()),
        other => CliError::Data(other.to_string()),
    }
}

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV_VAR) {
        Ok(raw) => raw
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{SEED_ENV_VAR}={raw} is not a valid u64 seed"))),
        Err(_) => Ok(None),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("invalid {what} {}: {e}", path.display())))
}

fn dataset_file(data: &Path) -> PathBuf {
    if data.is_dir() {
        data.join("dataset.jsonl")
    } else {
        data.to_path_buf()
    }
}

fn load_prepared(data: &Path) -> Result<DatasetSplit, CliError> {
    let path = dataset_file(data);
    let mut split = load_dataset(&path).map_err(|e| CliError::Data(e.to_string()))?;
    split
        .prepare_features(&DEFAULT_FEATURE_SPEC)
        .map_err(|e| CliError::Data(e.to_string()))?;
    Ok(split)
}

fn parse_seeds(raw: &str) -> Result<Vec<u64>, CliError> {
    let seeds: Result<Vec<u64>, _> = raw
        .split(',')
        .map(|s| s.trim().parse::<u64>())
        .collect();
    let seeds = seeds.map_err(|_| CliError::Usage(format!("invalid seed list '{raw}'")))?;
    if seeds.is_empty() {
        return Err(CliError::Usage("seed list is empty".into()));
    }
    Ok(seeds)
}

fn parse_values(raw: &str) -> Result<Vec<f64>, CliError> {
    let values: Result<Vec<f64>, _> = raw
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect();
    values.map_err(|_| CliError::Usage(format!("invalid value list '{raw}'")))
}

fn data_source(data: Option<PathBuf>, gen: Option<PathBuf>) -> Result<DataSource, CliError> {
    match (data, gen) {
        (Some(d), None) => Ok(DataSource::Path(dataset_file(&d))),
        (None, Some(g)) => {
            let mut cfg: GeneratorConfig = read_json(&g, "generator config")?;
            if let Some(seed) = env_seed()? {
                cfg.seed = seed;
            }
            Ok(DataSource::Generator(Box::new(cfg)))
        }
        _ => Err(CliError::Usage("exactly one of --data or --gen is required".into())),
    }
}

fn run_command(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { config, out } => {
            let mut cfg: GeneratorConfig = read_json(&config, "generator config")?;
            if let Some(seed) = env_seed()? {
                cfg.seed = seed;
            }
            let split = generate_synthetic_pair(&cfg, cfg.seed)
                .map_err(|e| CliError::Data(e.to_string()))?;
            std::fs::create_dir_all(&out)
                .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out.display())))?;
            save_dataset(&split, &out.join("dataset.jsonl"))
                .map_err(|e| CliError::Data(e.to_string()))?;
            let cfg_text = serde_json::to_string_pretty(&cfg)
                .map_err(|e| CliError::Data(e.to_string()))?;
            std::fs::write(out.join("generator_config.json"), cfg_text)
                .map_err(|e| CliError::Data(e.to_string()))?;
            let hash = dataset_hash(&split).map_err(classify_eval_error)?;
            println!(
                "generated {} graphs (hash {hash}) into {}",
                split.all_graphs().count(),
                out.display()
            );
            Ok(())
        }
        Command::Train { data, config, out, seed } => {
            let mut cfg: TrainConfig = read_json(&config, "train config")?;
            if let Some(s) = env_seed()? {
                cfg.master_seed = s;
            }
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            let split = load_prepared(&data)?;
            std::fs::create_dir_all(&out)
                .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out.display())))?;
            let mut trainer = crate::trainer::Trainer::new(&split, cfg).map_err(classify_train_error)?;
            while !trainer.finished() {
                let row = trainer.run_epoch(&split).map_err(classify_train_error)?;
                println!(
                    "epoch {}: total_p1 {:.4} total_p2 {:.4} val_f1 {:.4} ({:.2}s)",
                    row.epoch, row.phase1.total, row.phase2.total, row.val_f1, row.seconds
                );
            }
            trainer
                .checkpoint(&out.join("checkpoint.json"))
                .map_err(classify_train_error)?;
            std::fs::write(out.join("trace.csv"), trace_csv(&trainer.trace, false))
                .map_err(|e| CliError::Data(e.to_string()))?;
            println!("checkpoint written to {}", out.join("checkpoint.json").display());
            Ok(())
        }
        Command::Evaluate { data, params } => {
            let split = load_prepared(&data)?;
            let feature_dim = split
                .target_test
                .first()
                .or(split.source_test.first())
                .and_then(|g| g.features().map(|f| f.cols()))
                .ok_or_else(|| CliError::Data("dataset has no test graphs".into()))?;
            let (_, model) = load_params(&params, feature_dim).map_err(classify_train_error)?;
            let eval_split = |graphs: &[crate::graph::Graph]| -> Result<f64, CliError> {
                let mut preds = Vec::new();
                let mut labels = Vec::new();
                for g in graphs {
                    let (_, class) = predict(&model, g).map_err(|e| CliError::Data(e.to_string()))?;
                    preds.push(class);
                    labels.push(g.label().ok_or_else(|| {
                        CliError::Data("test graph without label".into())
                    })?);
                }
                f1_score(&preds, &labels).map_err(|e| CliError::Data(e.to_string()))
            };
            let target_f1 = eval_split(&split.target_test)?;
            let source_f1 = eval_split(&split.source_test)?;
            println!(
                "{{\"target_test_f1\": {target_f1}, \"source_test_f1\": {source_f1}}}"
            );
            Ok(())
        }
        Command::Run { data, gen, config, seeds, out } => {
            let source = data_source(data, gen)?;
            let cfg: TrainConfig = read_json(&config, "train config")?;
            cfg.validate().map_err(classify_train_error)?;
            let seeds = parse_seeds(&seeds)?;
            let report =
                run_experiment(&source, &cfg, &seeds, &out).map_err(classify_eval_error)?;
            println!(
                "dgda {:.4} +/- {:.4} | source_only {:.4} +/- {:.4} | target_supervised {:.4} +/- {:.4}",
                report.dgda.mean,
                report.dgda.std,
                report.source_only.mean,
                report.source_only.std,
                report.target_supervised.mean,
                report.target_supervised.std
            );
            println!("report written to {}", out.join("report.json").display());
            Ok(())
        }
        Command::Sweep { axis, values, data, gen, config, seeds, out } => {
            let axis = SweepAxis::from_name(&axis)
                .ok_or_else(|| CliError::Usage(format!("unknown sweep axis '{axis}'")))?;
            let values = parse_values(&values)?;
            let source = data_source(data, gen)?;
            let cfg: TrainConfig = read_json(&config, "train config")?;
            cfg.validate().map_err(classify_train_error)?;
            let seeds = parse_seeds(&seeds)?;
            let rows =
                sweep(axis, &values, &source, &cfg, &seeds, &out).map_err(classify_eval_error)?;
            for row in &rows {
                println!("{} = {}: mean F1 {:.4} +/- {:.4}", axis.name(), row.value, row.mean_f1, row.std_f1);
            }
            Ok(())
        }
        Command::Gradcheck { seed, config } => {
            let cfg = match config {
                Some(path) => read_json::<TrainConfig>(&path, "train config")?,
                None => TrainConfig::default(),
            };
            let mut seed_value = seed.unwrap_or(0);
            if seed.is_none() {
                if let Some(s) = env_seed()? {
                    seed_value = s;
                }
            }
            let report = gradcheck_report(&cfg, seed_value).map_err(classify_eval_error)?;
            for fam in &report.families {
                println!("{:<8} max relative error {:.3e}", fam.family, fam.max_rel_error);
            }
            println!(
                "overall {:.3e} (threshold {:.0e})",
                report.max_rel_error,
                crate::eval::GRADCHECK_THRESHOLD
            );
            if report.passed {
                Ok(())
            } else {
                Err(CliError::Numeric(format!(
                    "gradient check failed: max relative error {:.3e}",
                    report.max_rel_error
                )))
            }
        }
    }
}

/// Parse arguments and dispatch; returns the process exit code.
pub fn main_entry() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders --help/--version through the error path too
            let is_help = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if is_help {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_USAGE)
            };
        }
    };
    match run_command(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
