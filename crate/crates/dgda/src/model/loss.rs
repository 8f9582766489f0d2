use serde::{Deserialize, Serialize};

use crate::graph::{normalize_adjacency_matrix, AugmentedGraph, DomainTag, Graph};
use crate::tensor::{Tape, Tensor, Var};

use super::forward::{domain_logit, full_forward, label_logit, DropoutMasks, ForwardPass, LatentNoise, ParamVars};
use super::params::DgdaParams;
use super::{KlReduction, ModelError, POS_WEIGHT_CAP};

/// Weights of the disentanglement and regularization terms in the total
/// objective. Published defaults: gamma 1, alpha 1, omega 0.1, delta 5.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub gamma: f64,
    pub alpha: f64,
    pub omega: f64,
    pub delta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { gamma: 1.0, alpha: 1.0, omega: 0.1, delta: 5.0 }
    }
}

/// Scalar loss components recorded on a tape for one graph.
pub struct GraphLossVars {
    pub pass: ForwardPass,
    pub recon: Var,
    pub kl_d: Var,
    pub kl_y: Var,
    pub kl_o: Var,
    pub l_d: Var,
    /// Present only for labeled source graphs.
    pub l_y: Option<Var>,
    pub l_o: Var,
    pub l_e: Var,
}

/// Evaluated loss components; `l_y` is zero when the label term is absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub recon: f64,
    pub kl_d: f64,
    pub kl_y: f64,
    pub kl_o: f64,
    pub l_d: f64,
    pub l_y: f64,
    pub l_o: f64,
    pub l_e: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn zero() -> Self {
        LossBreakdown {
            recon: 0.0,
            kl_d: 0.0,
            kl_y: 0.0,
            kl_o: 0.0,
            l_d: 0.0,
            l_y: 0.0,
            l_o: 0.0,
            l_e: 0.0,
            total: 0.0,
        }
    }

    /// The weighted recombination of the stored parts.
    pub fn recombined_total(&self, w: &LossWeights) -> f64 {
        self.recon
            + self.kl_d
            + self.kl_y
            + self.kl_o
            + w.gamma * self.l_d
            + w.alpha * self.l_y
            + w.omega * self.l_o
            + w.delta * self.l_e
    }
}

/// KL divergence of a diagonal Gaussian `N(mu, sigma^2)` to `N(0, I)`:
/// the entry-wise sum of `-0.5 (1 + 2 log_sigma - mu^2 - exp(2 log_sigma))`,
/// divided by the node count under the per-node-mean reduction.
pub fn kl_to_standard_normal(
    tape: &mut Tape,
    mu: Var,
    log_sigma: Var,
    reduction: KlReduction,
) -> Result<Var, ModelError> {
    let (rows, cols) = tape.value(mu).shape();
    let ones = tape.leaf(Tensor::ones(rows, cols));
    let two_ls = tape.scale(log_sigma, 2.0);
    let mu_sq = tape.mul(mu, mu)?;
    let var = tape.exp(two_ls);
    let inner = tape.add(ones, two_ls)?;
    let inner = tape.sub(inner, mu_sq)?;
    let inner = tape.sub(inner, var)?;
    let summed = tape.sum(inner);
    let scale = match reduction {
        KlReduction::NodeMean => -0.5 / rows as f64,
        KlReduction::Sum => -0.5,
    };
    Ok(tape.scale(summed, scale))
}

/// Ratio of absent to present off-diagonal pairs, capped; 1 when the target
/// has no positive pair.
pub fn positive_pair_weight(target: &Tensor) -> f64 {
    let n = target.rows();
    let mut pos = 0usize;
    let mut neg = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if target.get(i, j) != 0.0 {
                pos += 1;
            } else {
                neg += 1;
            }
        }
    }
    if pos == 0 {
        1.0
    } else {
        (neg as f64 / pos as f64).min(POS_WEIGHT_CAP)
    }
}

/// Mean binary cross-entropy between pairwise logits and a binary target
/// over off-diagonal entries, with the positive class scaled by
/// `pos_weight`. Uses the softplus form, so saturated logits stay finite.
pub fn weighted_pair_bce(
    tape: &mut Tape,
    logits: Var,
    target: &Tensor,
    pos_weight: f64,
) -> Result<Var, ModelError> {
    let n = target.rows();
    let off_diag = n * n.saturating_sub(1);
    if off_diag == 0 {
        return Ok(tape.leaf(Tensor::scalar(0.0)));
    }
    let t = tape.leaf(target.clone());
    let one_minus_t = tape.leaf(target.map(|v| 1.0 - v));
    let mut mask = Tensor::ones(n, n);
    for i in 0..n {
        mask.set(i, i, 0.0);
    }
    let mask = tape.leaf(mask);

    let neg_logits = tape.scale(logits, -1.0);
    let sp_neg = tape.softplus(neg_logits); // -log sigmoid(x)
    let sp_pos = tape.softplus(logits); // -log (1 - sigmoid(x))
    let pos_term = tape.mul(t, sp_neg)?;
    let pos_term = tape.scale(pos_term, pos_weight);
    let neg_term = tape.mul(one_minus_t, sp_pos)?;
    let combined = tape.add(pos_term, neg_term)?;
    let masked = tape.mul(mask, combined)?;
    let summed = tape.sum(masked);
    Ok(tape.scale(summed, 1.0 / off_diag as f64))
}

/// Binary cross-entropy of a single logit against a 0/1 target.
pub fn binary_cross_entropy_scalar(
    tape: &mut Tape,
    logit: Var,
    target: f64,
) -> Result<Var, ModelError> {
    let neg = tape.scale(logit, -1.0);
    let sp_neg = tape.softplus(neg);
    let sp_pos = tape.softplus(logit);
    let pos_term = tape.scale(sp_neg, target);
    let neg_term = tape.scale(sp_pos, 1.0 - target);
    Ok(tape.add(pos_term, neg_term)?)
}

/// Element-wise latent regularizer, verbatim: the per-group mean of
/// `sigmoid(z) * log sigmoid(z)`, summed over the given groups. Negative for
/// finite `z`; `log sigmoid(z) = -softplus(-z)` keeps it stable.
pub fn entropy_regularizer(tape: &mut Tape, groups: &[Var]) -> Result<Var, ModelError> {
    let mut acc: Option<Var> = None;
    for &z in groups {
        let (rows, cols) = tape.value(z).shape();
        let s = tape.sigmoid(z);
        let neg_z = tape.scale(z, -1.0);
        let sp = tape.softplus(neg_z);
        let log_s = tape.scale(sp, -1.0);
        let term = tape.mul(s, log_s)?;
        let summed = tape.sum(term);
        let mean = tape.scale(summed, 1.0 / (rows * cols) as f64);
        acc = Some(match acc {
            None => mean,
            Some(a) => tape.add(a, mean)?,
        });
    }
    acc.ok_or(ModelError::EmptyBatch("entropy_regularizer"))
}

/// Record the full forward pass and every loss component for one graph.
pub fn graph_loss(
    tape: &mut Tape,
    pv: &ParamVars,
    input: &AugmentedGraph,
    noise: &LatentNoise,
    kl_reduction: KlReduction,
) -> Result<GraphLossVars, ModelError> {
    graph_loss_dropout(tape, pv, input, noise, kl_reduction, None)
}

/// [`graph_loss`] with optional extractor dropout (training only).
pub fn graph_loss_dropout(
    tape: &mut Tape,
    pv: &ParamVars,
    input: &AugmentedGraph,
    noise: &LatentNoise,
    kl_reduction: KlReduction,
    dropout: Option<&DropoutMasks>,
) -> Result<GraphLossVars, ModelError> {
    let g = &input.base;
    let a_hat = normalize_adjacency_matrix(&input.a_prime);
    let x = g.features_or_err()?.clone();
    let pass = full_forward(tape, pv, a_hat, x, noise, dropout)?;

    let recon_weight = positive_pair_weight(&input.a_prime);
    let recon = weighted_pair_bce(tape, pass.edge_logits, &input.a_prime, recon_weight)?;

    let kl_d = kl_to_standard_normal(tape, pass.d.mu, pass.d.log_sigma, kl_reduction)?;
    let kl_y = kl_to_standard_normal(tape, pass.y.mu, pass.y.log_sigma, kl_reduction)?;
    let kl_o = kl_to_standard_normal(tape, pass.o.mu, pass.o.log_sigma, kl_reduction)?;

    let d_logit = domain_logit(tape, pv, pass.d.z)?;
    let l_d = binary_cross_entropy_scalar(tape, d_logit, g.domain().value())?;

    let l_y = match (g.domain(), g.label()) {
        (DomainTag::Source, Some(label)) => {
            let logit = label_logit(tape, pv, pass.y.z)?;
            Some(binary_cross_entropy_scalar(tape, logit, f64::from(label))?)
        }
        _ => None,
    };

    let mask = input.perturbation_mask();
    let noise_weight = positive_pair_weight(&mask);
    let l_o = weighted_pair_bce(tape, pass.noise_logits, &mask, noise_weight)?;

    let l_e = entropy_regularizer(tape, &[pass.d.z, pass.y.z, pass.o.z])?;

    Ok(GraphLossVars { pass, recon, kl_d, kl_y, kl_o, l_d, l_y, l_o, l_e })
}

/// Weighted single-graph total on the tape.
pub(crate) fn combine_total(
    tape: &mut Tape,
    vars: &GraphLossVars,
    w: &LossWeights,
) -> Result<Var, ModelError> {
    let mut total = tape.add(vars.recon, vars.kl_d)?;
    total = tape.add(total, vars.kl_y)?;
    total = tape.add(total, vars.kl_o)?;
    let t_d = tape.scale(vars.l_d, w.gamma);
    total = tape.add(total, t_d)?;
    if let Some(l_y) = vars.l_y {
        let t_y = tape.scale(l_y, w.alpha);
        total = tape.add(total, t_y)?;
    }
    let t_o = tape.scale(vars.l_o, w.omega);
    total = tape.add(total, t_o)?;
    let t_e = tape.scale(vars.l_e, w.delta);
    total = tape.add(total, t_e)?;
    Ok(total)
}

fn read(tape: &Tape, v: Var) -> f64 {
    tape.value(v).item()
}

/// Single-graph objective: the negated ELBO plus the weighted
/// disentanglement terms, with the label term only for labeled source
/// graphs. The breakdown's stored total equals the weighted sum of its
/// parts.
pub fn total_loss(
    params: &DgdaParams,
    input: &AugmentedGraph,
    weights: &LossWeights,
    noise: &LatentNoise,
    kl_reduction: KlReduction,
) -> Result<LossBreakdown, ModelError> {
    let mut tape = Tape::new();
    let pv = ParamVars::load(&mut tape, params);
    let vars = graph_loss(&mut tape, &pv, input, noise, kl_reduction)?;
    let total = combine_total(&mut tape, &vars, weights)?;
    Ok(LossBreakdown {
        recon: read(&tape, vars.recon),
        kl_d: read(&tape, vars.kl_d),
        kl_y: read(&tape, vars.kl_y),
        kl_o: read(&tape, vars.kl_o),
        l_d: read(&tape, vars.l_d),
        l_y: vars.l_y.map_or(0.0, |v| read(&tape, v)),
        l_o: read(&tape, vars.l_o),
        l_e: read(&tape, vars.l_e),
        total: read(&tape, total),
    })
}

/// Batch objective: per-graph terms averaged over the whole batch, except
/// the label term, which averages over the labeled source graphs alone.
/// Returns the scalar root for backward plus the aggregated breakdown.
pub fn batch_objective(
    tape: &mut Tape,
    items: &[GraphLossVars],
    w: &LossWeights,
) -> Result<(Var, LossBreakdown), ModelError> {
    if items.is_empty() {
        return Err(ModelError::EmptyBatch("batch_objective"));
    }
    let n = items.len() as f64;
    let mean_of = |tape: &mut Tape, vars: Vec<Var>| -> Result<Var, ModelError> {
        let count = vars.len() as f64;
        let mut acc = vars[0];
        for &v in &vars[1..] {
            acc = tape.add(acc, v)?;
        }
        Ok(tape.scale(acc, 1.0 / count))
    };

    let recon = mean_of(tape, items.iter().map(|i| i.recon).collect())?;
    let kl_d = mean_of(tape, items.iter().map(|i| i.kl_d).collect())?;
    let kl_y = mean_of(tape, items.iter().map(|i| i.kl_y).collect())?;
    let kl_o = mean_of(tape, items.iter().map(|i| i.kl_o).collect())?;
    let l_d = mean_of(tape, items.iter().map(|i| i.l_d).collect())?;
    let l_o = mean_of(tape, items.iter().map(|i| i.l_o).collect())?;
    let l_e = mean_of(tape, items.iter().map(|i| i.l_e).collect())?;
    let labeled: Vec<Var> = items.iter().filter_map(|i| i.l_y).collect();
    let l_y = if labeled.is_empty() {
        None
    } else {
        Some(mean_of(tape, labeled)?)
    };

    let mut total = tape.add(recon, kl_d)?;
    total = tape.add(total, kl_y)?;
    total = tape.add(total, kl_o)?;
    let t_d = tape.scale(l_d, w.gamma);
    total = tape.add(total, t_d)?;
    if let Some(l_y) = l_y {
        let t_y = tape.scale(l_y, w.alpha);
        total = tape.add(total, t_y)?;
    }
    let t_o = tape.scale(l_o, w.omega);
    total = tape.add(total, t_o)?;
    let t_e = tape.scale(l_e, w.delta);
    total = tape.add(total, t_e)?;

    let breakdown = LossBreakdown {
        recon: read(tape, recon),
        kl_d: read(tape, kl_d),
        kl_y: read(tape, kl_y),
        kl_o: read(tape, kl_o),
        l_d: read(tape, l_d),
        l_y: l_y.map_or(0.0, |v| read(tape, v)),
        l_o: read(tape, l_o),
        l_e: read(tape, l_e),
        total: read(tape, total),
    };
    let _ = n;
    Ok((total, breakdown))
}

/// Mean label BCE over a batch of labeled source graphs, on the
/// deterministic latent path. Target-domain or unlabeled graphs are contract
/// violations.
pub fn label_loss_batch(params: &DgdaParams, graphs: &[Graph]) -> Result<f64, ModelError> {
    if graphs.is_empty() {
        return Err(ModelError::EmptyBatch("label_loss_batch"));
    }
    let mut tape = Tape::new();
    let pv = ParamVars::load(&mut tape, params);
    let mut acc = 0.0;
    for (index, g) in graphs.iter().enumerate() {
        if g.domain() == DomainTag::Target {
            return Err(ModelError::TargetInLabelBatch { index });
        }
        let label = g.label().ok_or(ModelError::UnlabeledInLabelBatch { index })?;
        let input = AugmentedGraph::clean(g);
        let a_hat = normalize_adjacency_matrix(&input.a_prime);
        let x = g.features_or_err()?.clone();
        let pass = full_forward(&mut tape, &pv, a_hat, x, &LatentNoise::Deterministic, None)?;
        let logit = label_logit(&mut tape, &pv, pass.y.z)?;
        let bce = binary_cross_entropy_scalar(&mut tape, logit, f64::from(label))?;
        acc += read(&tape, bce);
    }
    Ok(acc / graphs.len() as f64)
}
