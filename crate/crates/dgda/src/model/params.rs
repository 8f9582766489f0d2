use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::tensor::Tensor;

/// Width configuration of every DGDA component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Node feature width `K_X`.
    pub feature_dim: usize,
    /// Extractor/encoder hidden size `K_H`.
    pub hidden: usize,
    /// Number of stacked GCN layers in the feature extractor.
    pub extractor_depth: usize,
    pub k_d: usize,
    pub k_y: usize,
    pub k_o: usize,
    /// Width of both graph-decoder MLP layers (and the noise decoder's).
    pub decoder_hidden: usize,
    /// Hidden width of the label classifier MLP.
    pub classifier_hidden: usize,
}

impl ModelDims {
    /// Published hyperparameter set (hidden 256, Z_d 256, Z_y 256, Z_o 128,
    /// decoder hidden 64, two extractor layers).
    pub fn paper_default(feature_dim: usize) -> Self {
        ModelDims {
            feature_dim,
            hidden: 256,
            extractor_depth: 2,
            k_d: 256,
            k_y: 256,
            k_o: 128,
            decoder_hidden: 64,
            classifier_hidden: 64,
        }
    }

    pub fn concat_latent(&self) -> usize {
        self.k_d + self.k_y + self.k_o
    }
}

/// Parameter family tags; the two-phase trainer updates `group_a` =
/// {phi_f, phi_d, phi_y, theta_g, theta_d, theta_y} in phase 1 and
/// `group_b` = {phi_f, phi_o, theta_o} in phase 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParamFamily {
    PhiF,
    PhiD,
    PhiY,
    PhiO,
    ThetaG,
    ThetaD,
    ThetaY,
    ThetaO,
}

impl ParamFamily {
    pub const ALL: [ParamFamily; 8] = [
        ParamFamily::PhiF,
        ParamFamily::PhiD,
        ParamFamily::PhiY,
        ParamFamily::PhiO,
        ParamFamily::ThetaG,
        ParamFamily::ThetaD,
        ParamFamily::ThetaY,
        ParamFamily::ThetaO,
    ];

    pub fn in_group_a(self) -> bool {
        matches!(
            self,
            ParamFamily::PhiF
                | ParamFamily::PhiD
                | ParamFamily::PhiY
                | ParamFamily::ThetaG
                | ParamFamily::ThetaD
                | ParamFamily::ThetaY
        )
    }

    pub fn in_group_b(self) -> bool {
        matches!(self, ParamFamily::PhiF | ParamFamily::PhiO | ParamFamily::ThetaO)
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamFamily::PhiF => "phi_f",
            ParamFamily::PhiD => "phi_d",
            ParamFamily::PhiY => "phi_y",
            ParamFamily::PhiO => "phi_o",
            ParamFamily::ThetaG => "theta_g",
            ParamFamily::ThetaD => "theta_d",
            ParamFamily::ThetaY => "theta_y",
            ParamFamily::ThetaO => "theta_o",
        }
    }
}

/// Per-group variational encoder weights (single linear GCN layers).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderGroup {
    pub w_mu: Tensor,
    pub w_sigma: Tensor,
}

/// All trainable DGDA weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgdaParams {
    pub dims: ModelDims,
    /// phi_f: stacked GCN layer weights, `feature_dim -> hidden -> ... -> hidden`.
    pub extractor: Vec<Tensor>,
    pub enc_d: EncoderGroup,
    pub enc_y: EncoderGroup,
    pub enc_o: EncoderGroup,
    /// theta_g
    pub dec_w0: Tensor,
    pub dec_w1: Tensor,
    /// theta_d (single linear layer with bias)
    pub dom_w: Tensor,
    pub dom_b: Tensor,
    /// theta_y (two-layer MLP with biases)
    pub cls_w0: Tensor,
    pub cls_b0: Tensor,
    pub cls_w1: Tensor,
    pub cls_b1: Tensor,
    /// theta_o
    pub noise_w0: Tensor,
    pub noise_w1: Tensor,
}

fn glorot(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let mut t = Tensor::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            t.set(i, j, rng.gen_range(-bound..bound));
        }
    }
    t
}

impl DgdaParams {
    /// Seeded fan-based uniform initialization; biases start at zero.
    pub fn init(dims: ModelDims, master_seed: u64) -> Self {
        let mut rng = seed::rng(master_seed, &[seed::SALT_PARAM_INIT]);
        let mut extractor = Vec::with_capacity(dims.extractor_depth);
        let mut f_in = dims.feature_dim;
        for _ in 0..dims.extractor_depth {
            extractor.push(glorot(&mut rng, f_in, dims.hidden));
            f_in = dims.hidden;
        }
        let enc = |rng: &mut _, k| EncoderGroup {
            w_mu: glorot(rng, dims.hidden, k),
            w_sigma: glorot(rng, dims.hidden, k),
        };
        let enc_d = enc(&mut rng, dims.k_d);
        let enc_y = enc(&mut rng, dims.k_y);
        let enc_o = enc(&mut rng, dims.k_o);
        DgdaParams {
            dims,
            extractor,
            enc_d,
            enc_y,
            enc_o,
            dec_w0: glorot(&mut rng, dims.concat_latent(), dims.decoder_hidden),
            dec_w1: glorot(&mut rng, dims.decoder_hidden, dims.decoder_hidden),
            dom_w: glorot(&mut rng, dims.k_d, 1),
            dom_b: Tensor::zeros(1, 1),
            cls_w0: glorot(&mut rng, dims.k_y, dims.classifier_hidden),
            cls_b0: Tensor::zeros(1, dims.classifier_hidden),
            cls_w1: glorot(&mut rng, dims.classifier_hidden, 1),
            cls_b1: Tensor::zeros(1, 1),
            noise_w0: glorot(&mut rng, dims.k_o, dims.decoder_hidden),
            noise_w1: glorot(&mut rng, dims.decoder_hidden, dims.decoder_hidden),
        }
    }

    /// Stable checkpoint enumeration: `(name, family, tensor)` triples.
    pub fn named(&self) -> Vec<(String, ParamFamily, &Tensor)> {
        let mut out: Vec<(String, ParamFamily, &Tensor)> = Vec::new();
        for (i, w) in self.extractor.iter().enumerate() {
            out.push((format!("f.layer{i}.W"), ParamFamily::PhiF, w));
        }
        out.push(("e_d.W_mu".into(), ParamFamily::PhiD, &self.enc_d.w_mu));
        out.push(("e_d.W_sigma".into(), ParamFamily::PhiD, &self.enc_d.w_sigma));
        out.push(("e_y.W_mu".into(), ParamFamily::PhiY, &self.enc_y.w_mu));
        out.push(("e_y.W_sigma".into(), ParamFamily::PhiY, &self.enc_y.w_sigma));
        out.push(("e_o.W_mu".into(), ParamFamily::PhiO, &self.enc_o.w_mu));
        out.push(("e_o.W_sigma".into(), ParamFamily::PhiO, &self.enc_o.w_sigma));
        out.push(("d_g.W_g0".into(), ParamFamily::ThetaG, &self.dec_w0));
        out.push(("d_g.W_g1".into(), ParamFamily::ThetaG, &self.dec_w1));
        out.push(("c_d.W".into(), ParamFamily::ThetaD, &self.dom_w));
        out.push(("c_d.b".into(), ParamFamily::ThetaD, &self.dom_b));
        out.push(("c_y.layer0.W".into(), ParamFamily::ThetaY, &self.cls_w0));
        out.push(("c_y.layer0.b".into(), ParamFamily::ThetaY, &self.cls_b0));
        out.push(("c_y.layer1.W".into(), ParamFamily::ThetaY, &self.cls_w1));
        out.push(("c_y.layer1.b".into(), ParamFamily::ThetaY, &self.cls_b1));
        out.push(("d_o.W_n0".into(), ParamFamily::ThetaO, &self.noise_w0));
        out.push(("d_o.W_n1".into(), ParamFamily::ThetaO, &self.noise_w1));
        out
    }

    /// Mutable enumeration in the same order as [`DgdaParams::named`].
    pub fn named_mut(&mut self) -> Vec<(String, ParamFamily, &mut Tensor)> {
        let mut out: Vec<(String, ParamFamily, &mut Tensor)> = Vec::new();
        for (i, w) in self.extractor.iter_mut().enumerate() {
            out.push((format!("f.layer{i}.W"), ParamFamily::PhiF, w));
        }
        out.push(("e_d.W_mu".into(), ParamFamily::PhiD, &mut self.enc_d.w_mu));
        out.push(("e_d.W_sigma".into(), ParamFamily::PhiD, &mut self.enc_d.w_sigma));
        out.push(("e_y.W_mu".into(), ParamFamily::PhiY, &mut self.enc_y.w_mu));
        out.push(("e_y.W_sigma".into(), ParamFamily::PhiY, &mut self.enc_y.w_sigma));
        out.push(("e_o.W_mu".into(), ParamFamily::PhiO, &mut self.enc_o.w_mu));
        out.push(("e_o.W_sigma".into(), ParamFamily::PhiO, &mut self.enc_o.w_sigma));
        out.push(("d_g.W_g0".into(), ParamFamily::ThetaG, &mut self.dec_w0));
        out.push(("d_g.W_g1".into(), ParamFamily::ThetaG, &mut self.dec_w1));
        out.push(("c_d.W".into(), ParamFamily::ThetaD, &mut self.dom_w));
        out.push(("c_d.b".into(), ParamFamily::ThetaD, &mut self.dom_b));
        out.push(("c_y.layer0.W".into(), ParamFamily::ThetaY, &mut self.cls_w0));
        out.push(("c_y.layer0.b".into(), ParamFamily::ThetaY, &mut self.cls_b0));
        out.push(("c_y.layer1.W".into(), ParamFamily::ThetaY, &mut self.cls_w1));
        out.push(("c_y.layer1.b".into(), ParamFamily::ThetaY, &mut self.cls_b1));
        out.push(("d_o.W_n0".into(), ParamFamily::ThetaO, &mut self.noise_w0));
        out.push(("d_o.W_n1".into(), ParamFamily::ThetaO, &mut self.noise_w1));
        out
    }
}

/// Source-only / target-supervised baseline: the shared GCN extractor with
/// the label-classifier head directly on the mean readout. No latent
/// variables, no adversarial or reconstruction terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub dims: ModelDims,
    pub extractor: Vec<Tensor>,
    pub cls_w0: Tensor,
    pub cls_b0: Tensor,
    pub cls_w1: Tensor,
    pub cls_b1: Tensor,
}

impl BaselineParams {
    pub fn init(dims: ModelDims, master_seed: u64) -> Self {
        let mut rng = seed::rng(master_seed, &[seed::SALT_PARAM_INIT, 0xba5e]);
        let mut extractor = Vec::with_capacity(dims.extractor_depth);
        let mut f_in = dims.feature_dim;
        for _ in 0..dims.extractor_depth {
            extractor.push(glorot(&mut rng, f_in, dims.hidden));
            f_in = dims.hidden;
        }
        BaselineParams {
            dims,
            cls_w0: glorot(&mut rng, dims.hidden, dims.classifier_hidden),
            cls_b0: Tensor::zeros(1, dims.classifier_hidden),
            cls_w1: glorot(&mut rng, dims.classifier_hidden, 1),
            cls_b1: Tensor::zeros(1, 1),
            extractor,
        }
    }

    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = Vec::new();
        for (i, w) in self.extractor.iter().enumerate() {
            out.push((format!("f.layer{i}.W"), w));
        }
        out.push(("c_y.layer0.W".into(), &self.cls_w0));
        out.push(("c_y.layer0.b".into(), &self.cls_b0));
        out.push(("c_y.layer1.W".into(), &self.cls_w1));
        out.push(("c_y.layer1.b".into(), &self.cls_b1));
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> = Vec::new();
        for (i, w) in self.extractor.iter_mut().enumerate() {
            out.push((format!("f.layer{i}.W"), w));
        }
        out.push(("c_y.layer0.W".into(), &mut self.cls_w0));
        out.push(("c_y.layer0.b".into(), &mut self.cls_b0));
        out.push(("c_y.layer1.W".into(), &mut self.cls_w1));
        out.push(("c_y.layer1.b".into(), &mut self.cls_b1));
        out
    }
}
