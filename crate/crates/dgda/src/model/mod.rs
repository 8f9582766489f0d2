//! The DGDA network: shared GCN extractor, three variational latent
//! encoders, inner-product graph decoder, domain/label classifiers, noise
//! reconstructor, and every loss term.

mod forward;
mod loss;
mod params;
#[cfg(test)]
mod tests;

pub use forward::{
    decode_graph, encode_group, extract_features, extract_features_dropout, gcn_layer, label_logit,
    noise_reconstruction_logits, predict, predict_baseline, BaselineParamVars, DropoutMasks,
    ForwardPass, LatentEps, LatentGroup, LatentNoise, ParamVars,
};
pub(crate) use forward::{baseline_logit_graph, param_vars_from_ordered};
pub(crate) use loss::combine_total;

/// Unwrap a tensor-level error out of a [`ModelError`] for contexts (the
/// gradient checker) whose inputs are valid by construction.
pub(crate) fn flatten_tensor_error(e: ModelError) -> crate::tensor::TensorError {
    match e {
        ModelError::Tensor(t) => t,
        other => unreachable!("non-tensor model error on validated input: {other}"),
    }
}
pub use loss::{
    batch_objective, binary_cross_entropy_scalar, entropy_regularizer, graph_loss,
    graph_loss_dropout, kl_to_standard_normal, label_loss_batch, positive_pair_weight, total_loss,
    weighted_pair_bce, GraphLossVars, LossBreakdown, LossWeights,
};
pub use params::{BaselineParams, DgdaParams, ModelDims, ParamFamily};

use thiserror::Error;

use crate::graph::GraphError;
use crate::tensor::TensorError;

#[derive(Error, Debug)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("label loss: graph {index} has no label")]
    UnlabeledInLabelBatch { index: usize },
    #[error("label loss is source-only; graph {index} is target-domain")]
    TargetInLabelBatch { index: usize },
    #[error("{0}: empty batch")]
    EmptyBatch(&'static str),
    #[error("checkpoint shape mismatch for '{name}': expected {expected_rows}x{expected_cols}, got {got_rows}x{got_cols}")]
    CheckpointShape {
        name: String,
        expected_rows: usize,
        expected_cols: usize,
        got_rows: usize,
        got_cols: usize,
    },
    #[error("checkpoint is missing parameter '{0}'")]
    CheckpointMissing(String),
}

/// How KL terms are reduced over a graph's nodes. The per-node mean is the
/// default; the plain sum is exposed so both readings stay testable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlReduction {
    NodeMean,
    Sum,
}

/// Clamp bound applied to log-sigma before exponentiation.
pub(crate) const LOG_SIGMA_CLAMP: f64 = 10.0;

/// Cap for the positive-pair reweighting ratio in reconstruction losses.
pub(crate) const POS_WEIGHT_CAP: f64 = 1.0e4;
