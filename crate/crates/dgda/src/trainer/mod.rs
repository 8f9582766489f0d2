//! Two-phase alternating training, baselines, and checkpointing.
//!
//! Each iteration samples a source batch and a target batch, takes a
//! phase-1 step on clean graphs updating `group_a` = {phi_f, phi_d, phi_y,
//! theta_g, theta_d, theta_y}, augments both batches, then takes a phase-2
//! step updating `group_b` = {phi_f, phi_o, theta_o}.

mod baseline;
mod checkpoint;

pub use baseline::{evaluate_baseline, train_baseline, BaselineMode, BaselineTrace};
pub use checkpoint::{load_params, resume, Checkpoint, CHECKPOINT_VERSION};

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{augment, AugmentedGraph, DatasetSplit, Graph, GraphError};
use crate::model::{
    batch_objective, graph_loss_dropout, predict, DgdaParams, DropoutMasks, KlReduction,
    LatentNoise, LossBreakdown, LossWeights, ModelDims, ModelError, ParamVars,
};
use crate::seed;
use crate::tensor::{Optimizer, OptimizerKind, Tape, TensorError};

#[derive(Error, Debug)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("empty split: {0}")]
    EmptySplit(&'static str),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss at epoch {epoch}, iteration {iter}, batch seed {batch_seed}")]
    NonFiniteLoss { epoch: usize, iter: usize, batch_seed: u64 },
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint encoding: {0}")]
    Json(#[from] serde_json::Error),
    #[error("checkpoint version {got} unsupported (expected {expected})")]
    Version { got: u32, expected: u32 },
    #[error("target-supervised baseline needs target-train labels, but none are present")]
    MissingTargetLabels,
}

/// Every knob of the training objective and loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub omega: f64,
    pub delta: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub p_drop: f64,
    pub p_add: f64,
    /// Extractor dropout rate during training.
    pub dropout: f64,
    pub hidden: usize,
    pub extractor_depth: usize,
    pub k_d: usize,
    pub k_y: usize,
    pub k_o: usize,
    pub decoder_hidden: usize,
    pub classifier_hidden: usize,
    pub optimizer: OptimizerKind,
    pub kl_reduction: KlReduction,
    pub master_seed: u64,
}

impl Default for TrainConfig {
    /// Published hyperparameters (graph-collaboration column of the paper's
    /// table): SGD, lr 0.001, weight decay 0.0005, batch 64, hidden 256.
    fn default() -> Self {
        TrainConfig {
            gamma: 1.0,
            alpha: 1.0,
            omega: 0.1,
            delta: 5.0,
            learning_rate: 0.001,
            weight_decay: 0.0005,
            batch_size: 64,
            max_epochs: 200,
            patience: 20,
            p_drop: 0.1,
            p_add: 0.1,
            dropout: 0.2,
            hidden: 256,
            extractor_depth: 2,
            k_d: 256,
            k_y: 256,
            k_o: 128,
            decoder_hidden: 64,
            classifier_hidden: 64,
            optimizer: OptimizerKind::Sgd,
            kl_reduction: KlReduction::NodeMean,
            master_seed: 1,
        }
    }
}

impl TrainConfig {
    /// Scaled-down configuration calibrated for the 50-node synthetic
    /// benchmark; keeps every mechanism, trades width for wall-clock.
    pub fn synthetic_benchmark() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            weight_decay: 0.0005,
            batch_size: 16,
            max_epochs: 30,
            patience: 10,
            hidden: 16,
            k_d: 4,
            k_y: 8,
            k_o: 4,
            decoder_hidden: 8,
            classifier_hidden: 8,
            optimizer: OptimizerKind::Adam,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let prob = |name: &str, v: f64| {
            if !(0.0..=1.0).contains(&v) || v.is_nan() {
                Err(TrainError::InvalidConfig(format!("{name}={v} outside [0,1]")))
            } else {
                Ok(())
            }
        };
        prob("p_drop", self.p_drop)?;
        prob("p_add", self.p_add)?;
        if !(0.0..1.0).contains(&self.dropout) || self.dropout.is_nan() {
            return Err(TrainError::InvalidConfig(format!(
                "dropout={} outside [0,1)",
                self.dropout
            )));
        }
        for (name, v) in [
            ("gamma", self.gamma),
            ("alpha", self.alpha),
            ("omega", self.omega),
            ("delta", self.delta),
            ("learning_rate", self.learning_rate),
            ("weight_decay", self.weight_decay),
        ] {
            if v < 0.0 || v.is_nan() {
                return Err(TrainError::InvalidConfig(format!("{name}={v} must be >= 0")));
            }
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
            ("patience", self.patience),
            ("hidden", self.hidden),
            ("extractor_depth", self.extractor_depth),
            ("k_d", self.k_d),
            ("k_y", self.k_y),
            ("k_o", self.k_o),
            ("decoder_hidden", self.decoder_hidden),
            ("classifier_hidden", self.classifier_hidden),
        ] {
            if v == 0 {
                return Err(TrainError::InvalidConfig(format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            gamma: self.gamma,
            alpha: self.alpha,
            omega: self.omega,
            delta: self.delta,
        }
    }

    pub fn model_dims(&self, feature_dim: usize) -> ModelDims {
        ModelDims {
            feature_dim,
            hidden: self.hidden,
            extractor_depth: self.extractor_depth,
            k_d: self.k_d,
            k_y: self.k_y,
            k_o: self.k_o,
            decoder_hidden: self.decoder_hidden,
            classifier_hidden: self.classifier_hidden,
        }
    }
}

/// Per-epoch record: phase-wise loss means, source-validation F1, wall time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub epoch: usize,
    pub phase1: LossBreakdown,
    pub phase2: LossBreakdown,
    pub val_f1: f64,
    pub seconds: f64,
}

pub const TRACE_CSV_HEADER: &str =
    "epoch,recon,kl_d,kl_y,kl_o,l_d,l_y,l_o,l_e,total_p1,total_p2,val_f1,seconds";

/// Render traces as CSV. `deterministic` zeroes the wall-clock column so
/// reports stay byte-identical across reruns; component columns are the
/// phase-1 means.
pub fn trace_csv(traces: &[EpochTrace], deterministic: bool) -> String {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for t in traces {
        let b = &t.phase1;
        let seconds = if deterministic { 0.0 } else { t.seconds };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            t.epoch,
            b.recon,
            b.kl_d,
            b.kl_y,
            b.kl_o,
            b.l_d,
            b.l_y,
            b.l_o,
            b.l_e,
            b.total,
            t.phase2.total,
            t.val_f1,
            seconds
        ));
    }
    out
}

/// Resumable training state. The batch sampler carries no hidden stream:
/// every draw is re-derived from `(master_seed, epoch, iteration)`, so a
/// resumed run continues bit-for-bit where it stopped.
pub struct Trainer {
    pub cfg: TrainConfig,
    pub params: DgdaParams,
    pub optimizer: Optimizer,
    pub epoch: usize,
    pub trace: Vec<EpochTrace>,
    pub best_val_f1: f64,
    pub epochs_since_best: usize,
    /// Parameters at the latest epoch matching the best validation F1;
    /// returned by [`train`] in place of the final-epoch parameters.
    pub best_params: Option<DgdaParams>,
    train_idx: Vec<usize>,
    val_idx: Vec<usize>,
}

impl Trainer {
    pub fn new(split: &DatasetSplit, cfg: TrainConfig) -> Result<Self, TrainError> {
        cfg.validate()?;
        if split.source_train.is_empty() {
            return Err(TrainError::EmptySplit("source_train"));
        }
        if split.target_train.is_empty() {
            return Err(TrainError::EmptySplit("target_train"));
        }
        let feature_dim = split.source_train[0].features_or_err()?.cols();
        let (train_idx, val_idx) = validation_split(split.source_train.len(), cfg.master_seed);
        let params = DgdaParams::init(cfg.model_dims(feature_dim), cfg.master_seed);
        let optimizer = Optimizer::new(
            cfg.optimizer,
            cfg.learning_rate,
            cfg.weight_decay,
            params.named().len(),
        );
        Ok(Trainer {
            cfg,
            params,
            optimizer,
            epoch: 0,
            trace: Vec::new(),
            best_val_f1: -1.0,
            epochs_since_best: 0,
            best_params: None,
            train_idx,
            val_idx,
        })
    }

    pub fn finished(&self) -> bool {
        self.epoch >= self.cfg.max_epochs
            || (!self.val_idx.is_empty() && self.epochs_since_best >= self.cfg.patience)
    }

    /// Run one epoch of two-phase iterations.
    pub fn run_epoch(&mut self, split: &DatasetSplit) -> Result<&EpochTrace, TrainError> {
        let start = Instant::now();
        let epoch = self.epoch;
        let cfg = self.cfg.clone();
        let weights = cfg.loss_weights();
        let iters = self.train_idx.len().div_ceil(cfg.batch_size);
        let mut p1_parts: Vec<LossBreakdown> = Vec::with_capacity(iters);
        let mut p2_parts: Vec<LossBreakdown> = Vec::with_capacity(iters);

        for iter in 0..iters {
            let src_batch = sample_batch(
                &self.train_idx,
                cfg.batch_size,
                cfg.master_seed,
                &[seed::SALT_BATCH_SOURCE, epoch as u64, iter as u64],
            );
            let tgt_batch = sample_batch(
                &index_range(split.target_train.len()),
                cfg.batch_size,
                cfg.master_seed,
                &[seed::SALT_BATCH_TARGET, epoch as u64, iter as u64],
            );

            // phase 1: clean inputs, update group_a
            let clean: Vec<AugmentedGraph> = src_batch
                .iter()
                .map(|&i| AugmentedGraph::clean(&split.source_train[i]))
                .chain(
                    tgt_batch
                        .iter()
                        .map(|&i| AugmentedGraph::clean(&split.target_train[i])),
                )
                .collect();
            let b1 = self.batch_step(&clean, &weights, epoch, iter, 0, ParamFamilyPhase::GroupA)?;
            p1_parts.push(b1);

            // phase 2: perturbed inputs, update group_b
            let augmented: Vec<AugmentedGraph> = src_batch
                .iter()
                .map(|&i| &split.source_train[i])
                .chain(tgt_batch.iter().map(|&i| &split.target_train[i]))
                .enumerate()
                .map(|(k, g)| {
                    let aug_seed = seed::mix(
                        cfg.master_seed,
                        &[seed::SALT_AUGMENT, epoch as u64, iter as u64, k as u64],
                    );
                    augment(g, cfg.p_drop, cfg.p_add, aug_seed)
                })
                .collect::<Result<_, _>>()?;
            let b2 = self.batch_step(&augmented, &weights, epoch, iter, 1, ParamFamilyPhase::GroupB)?;
            p2_parts.push(b2);
        }

        let val_f1 = self.validation_f1(split)?;
        if !self.val_idx.is_empty() {
            // strict improvement resets patience; ties still refresh the
            // snapshot so equally-good later parameters win
            if val_f1 >= self.best_val_f1 {
                self.best_params = Some(self.params.clone());
            }
            if val_f1 > self.best_val_f1 {
                self.best_val_f1 = val_f1;
                self.epochs_since_best = 0;
            } else {
                self.epochs_since_best += 1;
            }
        }

        self.trace.push(EpochTrace {
            epoch,
            phase1: mean_breakdown(&p1_parts),
            phase2: mean_breakdown(&p2_parts),
            val_f1,
            seconds: start.elapsed().as_secs_f64(),
        });
        self.epoch += 1;
        Ok(self.trace.last().expect("just pushed"))
    }

    fn batch_step(
        &mut self,
        batch: &[AugmentedGraph],
        weights: &LossWeights,
        epoch: usize,
        iter: usize,
        phase: u64,
        update: ParamFamilyPhase,
    ) -> Result<LossBreakdown, TrainError> {
        let cfg = &self.cfg;
        let mut tape = Tape::new();
        let pv = ParamVars::load(&mut tape, &self.params);
        let mut items = Vec::with_capacity(batch.len());
        for (k, input) in batch.iter().enumerate() {
            let eps_seed = seed::mix(
                cfg.master_seed,
                &[seed::SALT_LATENT_EPS, epoch as u64, iter as u64, phase, k as u64],
            );
            let noise = LatentNoise::seeded(&self.params.dims, input.base.n(), eps_seed);
            let masks = (cfg.dropout > 0.0).then(|| {
                DropoutMasks::sample(
                    &self.params.dims,
                    input.base.n(),
                    cfg.dropout,
                    seed::mix(
                        cfg.master_seed,
                        &[seed::SALT_DROPOUT, epoch as u64, iter as u64, phase, k as u64],
                    ),
                )
            });
            items.push(graph_loss_dropout(
                &mut tape,
                &pv,
                input,
                &noise,
                cfg.kl_reduction,
                masks.as_ref(),
            )?);
        }
        let (root, breakdown) = batch_objective(&mut tape, &items, weights)?;
        if !breakdown.total.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                epoch,
                iter,
                batch_seed: seed::mix(
                    cfg.master_seed,
                    &[seed::SALT_BATCH_SOURCE, epoch as u64, iter as u64],
                ),
            });
        }
        let grads = tape.backward(root)?;
        let ordered = pv.ordered();
        for (slot, (_, family, tensor)) in self.params.named_mut().into_iter().enumerate() {
            let in_update_set = match update {
                ParamFamilyPhase::GroupA => family.in_group_a(),
                ParamFamilyPhase::GroupB => {
                    family.in_group_b()
                        && !(std::env::var("DGDA_PHASE2_FREEZE_PHIF").is_ok()
                            && family == crate::model::ParamFamily::PhiF)
                }
            };
            if in_update_set {
                self.optimizer.step_slot(slot, tensor, grads.of(ordered[slot]))?;
            }
        }
        Ok(breakdown)
    }

    fn validation_f1(&self, split: &DatasetSplit) -> Result<f64, TrainError> {
        if self.val_idx.is_empty() {
            return Ok(0.0);
        }
        let mut preds = Vec::with_capacity(self.val_idx.len());
        let mut labels = Vec::with_capacity(self.val_idx.len());
        for &i in &self.val_idx {
            let g = &split.source_train[i];
            let (_, class) = predict(&self.params, g)?;
            preds.push(class);
            labels.push(g.label().ok_or(GraphError::MissingLabel)?);
        }
        Ok(crate::eval::f1_score_unchecked(&preds, &labels))
    }
}

enum ParamFamilyPhase {
    GroupA,
    GroupB,
}

fn index_range(n: usize) -> Vec<usize> {
    (0..n).collect()
}

fn sample_batch(pool: &[usize], batch_size: usize, master: u64, salts: &[u64]) -> Vec<usize> {
    let mut rng = seed::rng(master, salts);
    (0..batch_size)
        .map(|_| pool[rng.gen_range(0..pool.len())])
        .collect()
}

/// Deterministic 90/10 train/validation partition of source-train indices.
fn validation_split(n: usize, master_seed: u64) -> (Vec<usize>, Vec<usize>) {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(master_seed, &[seed::SALT_VAL_SPLIT]));
    let val_count = if n >= 2 { (n / 10).max(1) } else { 0 };
    let val = idx[..val_count].to_vec();
    let train = idx[val_count..].to_vec();
    (train, val)
}

fn mean_breakdown(parts: &[LossBreakdown]) -> LossBreakdown {
    if parts.is_empty() {
        return LossBreakdown::zero();
    }
    let n = parts.len() as f64;
    let mut acc = LossBreakdown::zero();
    for p in parts {
        acc.recon += p.recon;
        acc.kl_d += p.kl_d;
        acc.kl_y += p.kl_y;
        acc.kl_o += p.kl_o;
        acc.l_d += p.l_d;
        acc.l_y += p.l_y;
        acc.l_o += p.l_o;
        acc.l_e += p.l_e;
        acc.total += p.total;
    }
    acc.recon /= n;
    acc.kl_d /= n;
    acc.kl_y /= n;
    acc.kl_o /= n;
    acc.l_d /= n;
    acc.l_y /= n;
    acc.l_o /= n;
    acc.l_e /= n;
    acc.total /= n;
    acc
}

/// Train DGDA to completion (max epochs or early stopping), returning the
/// best-validation parameters.
pub fn train(split: &DatasetSplit, cfg: TrainConfig) -> Result<(DgdaParams, Vec<EpochTrace>), TrainError> {
    let mut trainer = Trainer::new(split, cfg)?;
    while !trainer.finished() {
        trainer.run_epoch(split)?;
    }
    let params = trainer.best_params.unwrap_or(trainer.params);
    Ok((params, trainer.trace))
}

/// Evaluate target-test F1 of trained parameters.
pub fn evaluate_dgda(params: &DgdaParams, graphs: &[Graph]) -> Result<f64, TrainError> {
    let mut preds = Vec::with_capacity(graphs.len());
    let mut labels = Vec::with_capacity(graphs.len());
    for g in graphs {
        let (_, class) = predict(params, g)?;
        preds.push(class);
        labels.push(g.label().ok_or(GraphError::MissingLabel)?);
    }
    Ok(crate::eval::f1_score_unchecked(&preds, &labels))
}
