use rand_distr::{Distribution, StandardNormal};

use crate::graph::{normalize_adjacency, Graph};
use crate::tensor::{Tape, Tensor, Var};

use super::params::{BaselineParams, DgdaParams, ModelDims};
use super::{ModelError, LOG_SIGMA_CLAMP};

/// DGDA parameters loaded as leaves on a tape. Loading once per tape lets a
/// whole batch share the leaves, so one backward pass accumulates the batch
/// gradient per parameter.
pub struct ParamVars {
    pub extractor: Vec<Var>,
    pub enc_d: (Var, Var),
    pub enc_y: (Var, Var),
    pub enc_o: (Var, Var),
    pub dec_w0: Var,
    pub dec_w1: Var,
    pub dom_w: Var,
    pub dom_b: Var,
    pub cls_w0: Var,
    pub cls_b0: Var,
    pub cls_w1: Var,
    pub cls_b1: Var,
    pub noise_w0: Var,
    pub noise_w1: Var,
}

impl ParamVars {
    pub fn load(tape: &mut Tape, p: &DgdaParams) -> Self {
        ParamVars {
            extractor: p.extractor.iter().map(|w| tape.leaf(w.clone())).collect(),
            enc_d: (tape.leaf(p.enc_d.w_mu.clone()), tape.leaf(p.enc_d.w_sigma.clone())),
            enc_y: (tape.leaf(p.enc_y.w_mu.clone()), tape.leaf(p.enc_y.w_sigma.clone())),
            enc_o: (tape.leaf(p.enc_o.w_mu.clone()), tape.leaf(p.enc_o.w_sigma.clone())),
            dec_w0: tape.leaf(p.dec_w0.clone()),
            dec_w1: tape.leaf(p.dec_w1.clone()),
            dom_w: tape.leaf(p.dom_w.clone()),
            dom_b: tape.leaf(p.dom_b.clone()),
            cls_w0: tape.leaf(p.cls_w0.clone()),
            cls_b0: tape.leaf(p.cls_b0.clone()),
            cls_w1: tape.leaf(p.cls_w1.clone()),
            cls_b1: tape.leaf(p.cls_b1.clone()),
            noise_w0: tape.leaf(p.noise_w0.clone()),
            noise_w1: tape.leaf(p.noise_w1.clone()),
        }
    }

    /// Leaves in the same order as [`DgdaParams::named`].
    pub fn ordered(&self) -> Vec<Var> {
        let mut out = self.extractor.clone();
        out.extend([
            self.enc_d.0,
            self.enc_d.1,
            self.enc_y.0,
            self.enc_y.1,
            self.enc_o.0,
            self.enc_o.1,
            self.dec_w0,
            self.dec_w1,
            self.dom_w,
            self.dom_b,
            self.cls_w0,
            self.cls_b0,
            self.cls_w1,
            self.cls_b1,
            self.noise_w0,
            self.noise_w1,
        ]);
        out
    }
}

/// Rebuild a [`ParamVars`] from leaves listed in [`DgdaParams::named`]
/// order (the inverse of [`ParamVars::ordered`]).
pub(crate) fn param_vars_from_ordered(template: &DgdaParams, leaves: &[Var]) -> ParamVars {
    let depth = template.extractor.len();
    assert_eq!(leaves.len(), depth + 16, "leaf count mismatch");
    ParamVars {
        extractor: leaves[..depth].to_vec(),
        enc_d: (leaves[depth], leaves[depth + 1]),
        enc_y: (leaves[depth + 2], leaves[depth + 3]),
        enc_o: (leaves[depth + 4], leaves[depth + 5]),
        dec_w0: leaves[depth + 6],
        dec_w1: leaves[depth + 7],
        dom_w: leaves[depth + 8],
        dom_b: leaves[depth + 9],
        cls_w0: leaves[depth + 10],
        cls_b0: leaves[depth + 11],
        cls_w1: leaves[depth + 12],
        cls_b1: leaves[depth + 13],
        noise_w0: leaves[depth + 14],
        noise_w1: leaves[depth + 15],
    }
}

/// Baseline parameters loaded as tape leaves.
pub struct BaselineParamVars {
    pub extractor: Vec<Var>,
    pub cls_w0: Var,
    pub cls_b0: Var,
    pub cls_w1: Var,
    pub cls_b1: Var,
}

impl BaselineParamVars {
    pub fn load(tape: &mut Tape, p: &BaselineParams) -> Self {
        BaselineParamVars {
            extractor: p.extractor.iter().map(|w| tape.leaf(w.clone())).collect(),
            cls_w0: tape.leaf(p.cls_w0.clone()),
            cls_b0: tape.leaf(p.cls_b0.clone()),
            cls_w1: tape.leaf(p.cls_w1.clone()),
            cls_b1: tape.leaf(p.cls_b1.clone()),
        }
    }

    pub fn ordered(&self) -> Vec<Var> {
        let mut out = self.extractor.clone();
        out.extend([self.cls_w0, self.cls_b0, self.cls_w1, self.cls_b1]);
        out
    }
}

/// Reparameterization noise for the three latent groups.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentEps {
    pub d: Tensor,
    pub y: Tensor,
    pub o: Tensor,
}

impl LatentEps {
    /// Standard-normal draws in a fixed (d, y, o) row-major order.
    pub fn sample(dims: &ModelDims, n: usize, seed: u64) -> Self {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |rows: usize, cols: usize| {
            let mut t = Tensor::zeros(rows, cols);
            for i in 0..rows {
                for j in 0..cols {
                    t.set(i, j, StandardNormal.sample(&mut rng));
                }
            }
            t
        };
        LatentEps {
            d: draw(n, dims.k_d),
            y: draw(n, dims.k_y),
            o: draw(n, dims.k_o),
        }
    }
}

use rand_chacha::rand_core::SeedableRng;

/// Sampling mode for the latent variables.
#[derive(Debug, Clone, PartialEq)]
pub enum LatentNoise {
    /// `z = mu` exactly; the test-time path.
    Deterministic,
    /// `z = mu + exp(log_sigma) * eps` with the given draws.
    Eps(LatentEps),
}

impl LatentNoise {
    pub fn seeded(dims: &ModelDims, n: usize, seed: u64) -> Self {
        LatentNoise::Eps(LatentEps::sample(dims, n, seed))
    }
}

/// One latent group's recorded outputs. `log_sigma` is already clamped to
/// the stable range, and `z` honors the requested noise mode.
#[derive(Debug, Clone, Copy)]
pub struct LatentGroup {
    pub mu: Var,
    pub log_sigma: Var,
    pub z: Var,
}

/// `A_hat X W`, with ReLU iff `activation` is set.
pub fn gcn_layer(
    tape: &mut Tape,
    a_hat: Var,
    x: Var,
    w: Var,
    activation: bool,
) -> Result<Var, ModelError> {
    let propagated = tape.matmul(a_hat, x)?;
    let out = tape.matmul(propagated, w)?;
    Ok(if activation { tape.relu(out) } else { out })
}

/// The shared feature extractor: stacked ReLU GCN layers.
pub fn extract_features(
    tape: &mut Tape,
    pv: &ParamVars,
    a_hat: Var,
    x: Var,
) -> Result<Var, ModelError> {
    extract_features_dropout(tape, pv, a_hat, x, None)
}

/// Extractor with optional inverted-dropout masks (training only), one mask
/// per layer applied after the ReLU.
pub fn extract_features_dropout(
    tape: &mut Tape,
    pv: &ParamVars,
    a_hat: Var,
    x: Var,
    dropout: Option<&DropoutMasks>,
) -> Result<Var, ModelError> {
    let mut h = x;
    for (li, &w) in pv.extractor.iter().enumerate() {
        h = gcn_layer(tape, a_hat, h, w, true)?;
        if let Some(masks) = dropout {
            let mask = tape.leaf(masks.layers[li].clone());
            h = tape.mul(h, mask)?;
        }
    }
    Ok(h)
}

/// Pre-sampled inverted-dropout masks (entries 0 or 1/(1-rate)).
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    pub layers: Vec<Tensor>,
}

impl DropoutMasks {
    pub fn sample(dims: &ModelDims, n: usize, rate: f64, seed: u64) -> Self {
        use rand::Rng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let keep = 1.0 - rate;
        let layers = (0..dims.extractor_depth)
            .map(|_| {
                let mut m = Tensor::zeros(n, dims.hidden);
                for i in 0..n {
                    for j in 0..dims.hidden {
                        let v = if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 };
                        m.set(i, j, v);
                    }
                }
                m
            })
            .collect();
        DropoutMasks { layers }
    }
}

enum GroupEps<'a> {
    None,
    Tensor(&'a Tensor),
}

fn encode_with(
    tape: &mut Tape,
    weights: (Var, Var),
    a_hat: Var,
    h: Var,
    eps: GroupEps<'_>,
) -> Result<LatentGroup, ModelError> {
    let (w_mu, w_sigma) = weights;
    let mu = gcn_layer(tape, a_hat, h, w_mu, false)?;
    let log_sigma_raw = gcn_layer(tape, a_hat, h, w_sigma, false)?;
    let log_sigma = tape.clamp(log_sigma_raw, -LOG_SIGMA_CLAMP, LOG_SIGMA_CLAMP);
    let z = match eps {
        GroupEps::None => mu,
        GroupEps::Tensor(e) => {
            let sigma = tape.exp(log_sigma);
            let eps_leaf = tape.leaf(e.clone());
            let noise = tape.mul(sigma, eps_leaf)?;
            tape.add(mu, noise)?
        }
    };
    Ok(LatentGroup { mu, log_sigma, z })
}

/// Variational encoder for one latent group: linear GCN layers for mu and
/// log-sigma, then the reparameterized sample.
pub fn encode_group(
    tape: &mut Tape,
    weights: (Var, Var),
    a_hat: Var,
    h: Var,
    eps: Option<&Tensor>,
) -> Result<LatentGroup, ModelError> {
    encode_with(
        tape,
        weights,
        a_hat,
        h,
        match eps {
            None => GroupEps::None,
            Some(e) => GroupEps::Tensor(e),
        },
    )
}

/// Inner-product decoder logits: `Z_g = ReLU([Z_d ++ Z_y ++ Z_o] W_g0) W_g1`,
/// logits `Z_g Z_g^T`.
pub(crate) fn decode_edge_logits(
    tape: &mut Tape,
    pv: &ParamVars,
    z_d: Var,
    z_y: Var,
    z_o: Var,
) -> Result<Var, ModelError> {
    let cat = tape.concat_cols(&[z_d, z_y, z_o])?;
    let pre = tape.matmul(cat, pv.dec_w0)?;
    let act = tape.relu(pre);
    let z_g = tape.matmul(act, pv.dec_w1)?;
    let z_g_t = tape.transpose(z_g);
    Ok(tape.matmul(z_g, z_g_t)?)
}

/// Edge-probability matrix `sigmoid(Z_g Z_g^T)`; symmetric by construction.
pub fn decode_graph(
    tape: &mut Tape,
    pv: &ParamVars,
    z_d: Var,
    z_y: Var,
    z_o: Var,
) -> Result<Var, ModelError> {
    let logits = decode_edge_logits(tape, pv, z_d, z_y, z_o)?;
    Ok(tape.sigmoid(logits))
}

/// Noise-reconstruction logits `R R^T` with `R = ReLU(Z_o W_n0) W_n1`.
pub fn noise_reconstruction_logits(
    tape: &mut Tape,
    pv: &ParamVars,
    z_o: Var,
) -> Result<Var, ModelError> {
    let pre = tape.matmul(z_o, pv.noise_w0)?;
    let act = tape.relu(pre);
    let r = tape.matmul(act, pv.noise_w1)?;
    let r_t = tape.transpose(r);
    Ok(tape.matmul(r, r_t)?)
}

/// Domain-classifier logit: mean readout of `Z_d` through one linear layer.
pub(crate) fn domain_logit(tape: &mut Tape, pv: &ParamVars, z_d: Var) -> Result<Var, ModelError> {
    let readout = tape.mean_rows(z_d)?;
    let wx = tape.matmul(readout, pv.dom_w)?;
    Ok(tape.add(wx, pv.dom_b)?)
}

/// Label-classifier logit: mean readout of `Z_y` through the two-layer MLP.
pub fn label_logit(tape: &mut Tape, pv: &ParamVars, z_y: Var) -> Result<Var, ModelError> {
    let readout = tape.mean_rows(z_y)?;
    let h_pre = tape.matmul(readout, pv.cls_w0)?;
    let h_pre = tape.add(h_pre, pv.cls_b0)?;
    let h = tape.relu(h_pre);
    let logit = tape.matmul(h, pv.cls_w1)?;
    Ok(tape.add(logit, pv.cls_b1)?)
}

fn baseline_logit(
    tape: &mut Tape,
    pv: &BaselineParamVars,
    a_hat: Var,
    x: Var,
    dropout: Option<&DropoutMasks>,
) -> Result<Var, ModelError> {
    let mut h = x;
    for (li, &w) in pv.extractor.iter().enumerate() {
        let propagated = tape.matmul(a_hat, h)?;
        let pre = tape.matmul(propagated, w)?;
        h = tape.relu(pre);
        if let Some(masks) = dropout {
            let mask = tape.leaf(masks.layers[li].clone());
            h = tape.mul(h, mask)?;
        }
    }
    let readout = tape.mean_rows(h)?;
    let h_pre = tape.matmul(readout, pv.cls_w0)?;
    let h_pre = tape.add(h_pre, pv.cls_b0)?;
    let hid = tape.relu(h_pre);
    let logit = tape.matmul(hid, pv.cls_w1)?;
    Ok(tape.add(logit, pv.cls_b1)?)
}

pub(crate) fn baseline_logit_graph(
    tape: &mut Tape,
    pv: &BaselineParamVars,
    g: &Graph,
    dropout: Option<&DropoutMasks>,
) -> Result<Var, ModelError> {
    let a_hat = tape.leaf(normalize_adjacency(g));
    let x = tape.leaf(g.features_or_err()?.clone());
    baseline_logit(tape, pv, a_hat, x, dropout)
}

/// Everything one DGDA forward pass records for a single graph.
pub struct ForwardPass {
    pub a_hat: Var,
    pub h: Var,
    pub d: LatentGroup,
    pub y: LatentGroup,
    pub o: LatentGroup,
    pub edge_logits: Var,
    pub noise_logits: Var,
}

/// Full forward pass over a (possibly perturbed) adjacency and features.
pub(crate) fn full_forward(
    tape: &mut Tape,
    pv: &ParamVars,
    a_hat_value: Tensor,
    x_value: Tensor,
    noise: &LatentNoise,
    dropout: Option<&DropoutMasks>,
) -> Result<ForwardPass, ModelError> {
    let a_hat = tape.leaf(a_hat_value);
    let x = tape.leaf(x_value);
    let h = extract_features_dropout(tape, pv, a_hat, x, dropout)?;
    let (eps_d, eps_y, eps_o) = match noise {
        LatentNoise::Deterministic => (None, None, None),
        LatentNoise::Eps(e) => (Some(&e.d), Some(&e.y), Some(&e.o)),
    };
    let d = encode_group(tape, pv.enc_d, a_hat, h, eps_d)?;
    let y = encode_group(tape, pv.enc_y, a_hat, h, eps_y)?;
    let o = encode_group(tape, pv.enc_o, a_hat, h, eps_o)?;
    let edge_logits = decode_edge_logits(tape, pv, d.z, y.z, o.z)?;
    let noise_logits = noise_reconstruction_logits(tape, pv, o.z)?;
    Ok(ForwardPass { a_hat, h, d, y, o, edge_logits, noise_logits })
}

/// Deterministic test-time prediction on a clean graph: `z_y = mu_y`, mean
/// readout, label MLP, sigmoid. Returns the positive-class probability and
/// the thresholded class (`p >= 0.5`).
pub fn predict(params: &DgdaParams, g: &Graph) -> Result<(f64, bool), ModelError> {
    let mut tape = Tape::new();
    let pv = ParamVars::load(&mut tape, params);
    let a_hat = tape.leaf(normalize_adjacency(g));
    let x = tape.leaf(g.features_or_err()?.clone());
    let h = extract_features(&mut tape, &pv, a_hat, x)?;
    let y = encode_group(&mut tape, pv.enc_y, a_hat, h, None)?;
    let logit = label_logit(&mut tape, &pv, y.z)?;
    let p = crate::tensor::sigmoid_scalar(tape.value(logit).item());
    Ok((p, p >= 0.5))
}

/// Baseline prediction: extractor + label head, no latent path.
pub fn predict_baseline(params: &BaselineParams, g: &Graph) -> Result<(f64, bool), ModelError> {
    let mut tape = Tape::new();
    let pv = BaselineParamVars::load(&mut tape, params);
    let logit = baseline_logit_graph(&mut tape, &pv, g, None)?;
    let p = crate::tensor::sigmoid_scalar(tape.value(logit).item());
    Ok((p, p >= 0.5))
}
