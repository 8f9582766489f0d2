use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{DatasetSplit, Graph, GraphError};
use crate::model::{
    binary_cross_entropy_scalar, predict_baseline, BaselineParams, BaselineParamVars, DropoutMasks,
    ModelError,
};
use crate::seed;
use crate::tensor::{Optimizer, Tape};

use super::{validation_split, TrainConfig, TrainError};

/// Which labeled pool the baseline trains on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    /// Labeled source graphs only; the no-adaptation control.
    SourceOnly,
    /// Labeled target graphs; an upper bound, not an adaptation method.
    /// Explicitly opts in to reading the masked target-train labels.
    TargetSupervised,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineTrace {
    pub epoch: usize,
    pub loss: f64,
    pub val_f1: f64,
    pub seconds: f64,
}

/// Train the extractor + label head with plain BCE (no latent variables, no
/// augmentation, no adversarial terms).
pub fn train_baseline(
    split: &DatasetSplit,
    cfg: &TrainConfig,
    mode: BaselineMode,
) -> Result<(BaselineParams, Vec<BaselineTrace>), TrainError> {
    cfg.validate()?;
    let pool: Vec<Graph> = match mode {
        BaselineMode::SourceOnly => split.source_train.clone(),
        BaselineMode::TargetSupervised => {
            let graphs = split.unmasked_target_train();
            if graphs.iter().any(|g| g.label().is_none()) {
                return Err(TrainError::MissingTargetLabels);
            }
            graphs
        }
    };
    if pool.is_empty() {
        return Err(TrainError::EmptySplit("baseline training pool"));
    }
    let feature_dim = pool[0].features_or_err()?.cols();
    let (train_idx, val_idx) = validation_split(pool.len(), cfg.master_seed);
    let mut params = BaselineParams::init(cfg.model_dims(feature_dim), cfg.master_seed);
    let mut optimizer = Optimizer::new(
        cfg.optimizer,
        cfg.learning_rate,
        cfg.weight_decay,
        params.named().len(),
    );

    let mode_salt = match mode {
        BaselineMode::SourceOnly => 0u64,
        BaselineMode::TargetSupervised => 1,
    };
    let mut trace = Vec::new();
    let mut best = -1.0f64;
    let mut since_best = 0usize;
    let mut best_params: Option<BaselineParams> = None;
    let iters = train_idx.len().div_ceil(cfg.batch_size);
    for epoch in 0..cfg.max_epochs {
        let start = Instant::now();
        let mut loss_acc = 0.0;
        for iter in 0..iters {
            let mut rng = seed::rng(
                cfg.master_seed,
                &[seed::SALT_BATCH_SOURCE, mode_salt, epoch as u64, iter as u64],
            );
            let batch: Vec<&Graph> = (0..cfg.batch_size)
                .map(|_| &pool[train_idx[rng.gen_range(0..train_idx.len())]])
                .collect();

            let mut tape = Tape::new();
            let pv = BaselineParamVars::load(&mut tape, &params);
            let mut total = None;
            for (index, g) in batch.iter().enumerate() {
                let label = g.label().ok_or(ModelError::UnlabeledInLabelBatch { index })?;
                let masks = (cfg.dropout > 0.0).then(|| {
                    DropoutMasks::sample(
                        &cfg.model_dims(feature_dim),
                        g.n(),
                        cfg.dropout,
                        seed::mix(
                            cfg.master_seed,
                            &[seed::SALT_DROPOUT, mode_salt, epoch as u64, iter as u64, index as u64],
                        ),
                    )
                });
                let logit = crate::model::baseline_logit_graph(&mut tape, &pv, g, masks.as_ref())?;
                let bce = binary_cross_entropy_scalar(&mut tape, logit, f64::from(label))?;
                total = Some(match total {
                    None => bce,
                    Some(acc) => tape.add(acc, bce)?,
                });
            }
            let summed = total.ok_or(ModelError::EmptyBatch("baseline batch"))?;
            let root = tape.scale(summed, 1.0 / batch.len() as f64);
            let loss = tape.value(root).item();
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    iter,
                    batch_seed: seed::mix(
                        cfg.master_seed,
                        &[seed::SALT_BATCH_SOURCE, mode_salt, epoch as u64, iter as u64],
                    ),
                });
            }
            loss_acc += loss;
            let grads = tape.backward(root)?;
            let ordered = pv.ordered();
            for (slot, (_, tensor)) in params.named_mut().into_iter().enumerate() {
                optimizer.step_slot(slot, tensor, grads.of(ordered[slot]))?;
            }
        }

        let val_f1 = if val_idx.is_empty() {
            0.0
        } else {
            let mut preds = Vec::new();
            let mut labels = Vec::new();
            for &i in &val_idx {
                let g = &pool[i];
                let (_, class) = predict_baseline(&params, g)?;
                preds.push(class);
                labels.push(g.label().ok_or(GraphError::MissingLabel)?);
            }
            crate::eval::f1_score_unchecked(&preds, &labels)
        };
        if !val_idx.is_empty() {
            if val_f1 >= best {
                best_params = Some(params.clone());
            }
            if val_f1 > best {
                best = val_f1;
                since_best = 0;
            } else {
                since_best += 1;
            }
        }
        trace.push(BaselineTrace {
            epoch,
            loss: loss_acc / iters.max(1) as f64,
            val_f1,
            seconds: start.elapsed().as_secs_f64(),
        });
        if !val_idx.is_empty() && since_best >= cfg.patience {
            break;
        }
    }
    Ok((best_params.unwrap_or(params), trace))
}

/// Target-test F1 of a trained baseline.
pub fn evaluate_baseline(params: &BaselineParams, graphs: &[Graph]) -> Result<f64, TrainError> {
    let mut preds = Vec::with_capacity(graphs.len());
    let mut labels = Vec::with_capacity(graphs.len());
    for g in graphs {
        let (_, class) = predict_baseline(params, g)?;
        preds.push(class);
        labels.push(g.label().ok_or(GraphError::MissingLabel)?);
    }
    Ok(crate::eval::f1_score_unchecked(&preds, &labels))
}
