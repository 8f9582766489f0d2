use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{augment, DomainTag, Graph};
use crate::model::{DgdaParams, LatentEps, LatentNoise, ModelDims, ParamFamily};
use crate::seed;
use crate::tensor::{grad_check, Tensor};
use crate::trainer::TrainConfig;

use super::EvalError;

pub const GRADCHECK_THRESHOLD: f64 = 1e-4;
const GRADCHECK_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyGradError {
    pub family: String,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub seed: u64,
    pub families: Vec<FamilyGradError>,
    pub max_rel_error: f64,
    pub passed: bool,
}

/// Probe widths for the finite-difference oracle. Central differences cost
/// two forward passes per parameter entry, so the probe instance is small;
/// gradient rules do not depend on layer width.
fn probe_dims(cfg: &TrainConfig) -> ModelDims {
    ModelDims {
        feature_dim: 4,
        hidden: 6,
        extractor_depth: cfg.extractor_depth,
        k_d: 3,
        k_y: 3,
        k_o: 3,
        decoder_hidden: 4,
        classifier_hidden: 4,
    }
}

fn probe_graph(dims: &ModelDims, seed_value: u64) -> Graph {
    let mut rng = seed::rng(seed_value, &[seed::SALT_GRADCHECK]);
    let n = 6;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < 0.4 {
                edges.push((i, j));
            }
        }
    }
    let mut g = Graph::from_edges(n, &edges, None, Some(true), DomainTag::Source)
        .expect("probe edges are valid");
    let mut x = Tensor::zeros(n, dims.feature_dim);
    for i in 0..n {
        for j in 0..dims.feature_dim {
            x.set(i, j, rng.gen_range(-1.0..1.0));
        }
    }
    g.set_features(x).expect("feature rows match");
    g
}

/// Check analytic gradients of the total loss against central finite
/// differences, one parameter family at a time, on a random 6-node
/// augmented instance.
pub fn gradcheck_report(cfg: &TrainConfig, seed_value: u64) -> Result<GradCheckReport, EvalError> {
    let dims = probe_dims(cfg);
    let params = DgdaParams::init(dims, seed_value);
    let g = probe_graph(&dims, seed_value);
    let aug = augment(&g, 0.3, 0.3, seed::mix(seed_value, &[seed::SALT_GRADCHECK, 1]))
        .map_err(crate::model::ModelError::from)?;
    let eps = LatentEps::sample(&dims, g.n(), seed::mix(seed_value, &[seed::SALT_GRADCHECK, 2]));
    let weights = cfg.loss_weights();
    let kl_reduction = cfg.kl_reduction;

    let named = params.named();
    let mut families = Vec::new();
    let mut worst: f64 = 0.0;
    for family in ParamFamily::ALL {
        let member_idx: Vec<usize> = named
            .iter()
            .enumerate()
            .filter(|(_, (_, f, _))| *f == family)
            .map(|(i, _)| i)
            .collect();
        let member_tensors: Vec<Tensor> = member_idx
            .iter()
            .map(|&i| named[i].2.clone())
            .collect();

        let params_c = params.clone();
        let aug_c = aug.clone();
        let eps_c = eps.clone();
        let idx_c = member_idx.clone();
        let err = grad_check(
            move |tape, vars| {
                // rebuild the full parameter set: probed family from `vars`,
                // everything else as fixed leaves
                let named_full = params_c.named();
                let mut leaves = Vec::with_capacity(named_full.len());
                for (i, (_, _, tensor)) in named_full.iter().enumerate() {
                    match idx_c.iter().position(|&k| k == i) {
                        Some(j) => leaves.push(vars[j]),
                        None => leaves.push(tape.leaf((*tensor).clone())),
                    }
                }
                let pv = crate::model::param_vars_from_ordered(&params_c, &leaves);
                let loss_vars = crate::model::graph_loss(
                    tape,
                    &pv,
                    &aug_c,
                    &LatentNoise::Eps(eps_c.clone()),
                    kl_reduction,
                )
                .map_err(crate::model::flatten_tensor_error)?;
                crate::model::combine_total(tape, &loss_vars, &weights)
                    .map_err(crate::model::flatten_tensor_error)
            },
            &member_tensors,
            GRADCHECK_STEP,
        )?;
        worst = worst.max(err);
        families.push(FamilyGradError {
            family: family.name().to_string(),
            max_rel_error: err,
        });
    }

    Ok(GradCheckReport {
        seed: seed_value,
        families,
        max_rel_error: worst,
        passed: worst < GRADCHECK_THRESHOLD,
    })
}
