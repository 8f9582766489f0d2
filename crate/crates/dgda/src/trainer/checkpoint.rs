use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::graph::DatasetSplit;
use crate::model::ModelError;
use crate::tensor::{Optimizer, Tensor};

use super::{EpochTrace, TrainConfig, TrainError, Trainer};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Versioned training snapshot. The batch sampler is counter-derived from
/// `(master_seed, epoch, iteration)`, so `next_epoch` plus the optimizer
/// moments is the complete sampler/optimizer state.
#[derive(Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: TrainConfig,
    pub next_epoch: usize,
    pub params: Vec<(String, Tensor)>,
    pub optimizer: Optimizer,
    pub best_val_f1: f64,
    pub epochs_since_best: usize,
    pub best_params: Option<Vec<(String, Tensor)>>,
    pub trace: Vec<EpochTrace>,
}

impl Trainer {
    /// Write the full training state; atomic via temp file + rename.
    pub fn checkpoint(&self, path: &Path) -> Result<(), TrainError> {
        let snapshot = Checkpoint {
            version: CHECKPOINT_VERSION,
            config: self.cfg.clone(),
            next_epoch: self.epoch,
            params: self
                .params
                .named()
                .into_iter()
                .map(|(name, _, t)| (name, t.clone()))
                .collect(),
            optimizer: self.optimizer.clone(),
            best_val_f1: self.best_val_f1,
            epochs_since_best: self.epochs_since_best,
            best_params: self.best_params.as_ref().map(|p| {
                p.named()
                    .into_iter()
                    .map(|(name, _, t)| (name, t.clone()))
                    .collect()
            }),
            trace: self.trace.clone(),
        };
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_string(&snapshot)?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }
}

fn apply_stored_params(
    params: &mut crate::model::DgdaParams,
    stored: Vec<(String, Tensor)>,
) -> Result<(), TrainError> {
    let mut stored: HashMap<String, Tensor> = stored.into_iter().collect();
    for (name, _, tensor) in params.named_mut() {
        let loaded = stored
            .remove(&name)
            .ok_or_else(|| ModelError::CheckpointMissing(name.clone()))?;
        if loaded.shape() != tensor.shape() {
            return Err(ModelError::CheckpointShape {
                name,
                expected_rows: tensor.rows(),
                expected_cols: tensor.cols(),
                got_rows: loaded.rows(),
                got_cols: loaded.cols(),
            }
            .into());
        }
        *tensor = loaded;
    }
    Ok(())
}

fn read_checkpoint(path: &Path) -> Result<Checkpoint, TrainError> {
    let text = std::fs::read_to_string(path)?;
    let snapshot: Checkpoint = serde_json::from_str(&text)?;
    if snapshot.version != CHECKPOINT_VERSION {
        return Err(TrainError::Version {
            got: snapshot.version,
            expected: CHECKPOINT_VERSION,
        });
    }
    Ok(snapshot)
}

/// Restore a [`Trainer`] from a checkpoint; continues exactly where the
/// saved run stopped.
pub fn resume(path: &Path, split: &DatasetSplit) -> Result<Trainer, TrainError> {
    let snapshot = read_checkpoint(path)?;
    let mut trainer = Trainer::new(split, snapshot.config)?;
    apply_stored_params(&mut trainer.params, snapshot.params)?;
    trainer.optimizer = snapshot.optimizer;
    trainer.epoch = snapshot.next_epoch;
    trainer.best_val_f1 = snapshot.best_val_f1;
    trainer.epochs_since_best = snapshot.epochs_since_best;
    trainer.best_params = match snapshot.best_params {
        Some(stored) => {
            let mut best = trainer.params.clone();
            apply_stored_params(&mut best, stored)?;
            Some(best)
        }
        None => None,
    };
    trainer.trace = snapshot.trace;
    Ok(trainer)
}

/// Load parameters for evaluation (the best-validation snapshot when one
/// was recorded), validating shapes against the checkpoint's own config and
/// the dataset's feature width.
pub fn load_params(
    path: &Path,
    feature_dim: usize,
) -> Result<(TrainConfig, crate::model::DgdaParams), TrainError> {
    let snapshot = read_checkpoint(path)?;
    let mut params =
        crate::model::DgdaParams::init(snapshot.config.model_dims(feature_dim), 0);
    apply_stored_params(&mut params, snapshot.best_params.unwrap_or(snapshot.params))?;
    Ok((snapshot.config, params))
}
