use serde::{Deserialize, Serialize};

use super::{Result, Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct AdamSlot {
    m: Option<Tensor>,
    v: Option<Tensor>,
    t: u64,
}

/// Gradient-descent update rule with coupled weight decay.
///
/// SGD: `p <- p - lr * (g + wd * p)`. Adam uses the same decayed gradient
/// with bias-corrected first/second moments. Moment state is kept per
/// parameter slot so a slot that sits out a phase keeps its step count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub weight_decay: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    slots: Vec<AdamSlot>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64, weight_decay: f64, n_slots: usize) -> Self {
        Optimizer {
            kind,
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            slots: vec![AdamSlot::default(); n_slots],
        }
    }

    pub fn n_slots(&self) -> usize {
        self.slots.len()
    }

    /// Apply one update to the parameter held in `slot`.
    pub fn step_slot(&mut self, slot: usize, param: &mut Tensor, grad: &Tensor) -> Result<()> {
        if !param.same_shape(grad) {
            return Err(TensorError::ShapeMismatch {
                op: "optimizer_step",
                lhs_rows: param.rows(),
                lhs_cols: param.cols(),
                rhs_rows: grad.rows(),
                rhs_cols: grad.cols(),
            });
        }
        // lr == 0 must leave parameters bitwise unchanged.
        if self.learning_rate == 0.0 {
            return Ok(());
        }
        let lr = self.learning_rate;
        let wd = self.weight_decay;
        match self.kind {
            OptimizerKind::Sgd => {
                let p = param.data_mut();
                let g = grad.data();
                for i in 0..p.len() {
                    p[i] -= lr * (g[i] + wd * p[i]);
                }
            }
            OptimizerKind::Adam => {
                let state = &mut self.slots[slot];
                if state.m.is_none() {
                    state.m = Some(Tensor::zeros(param.rows(), param.cols()));
                    state.v = Some(Tensor::zeros(param.rows(), param.cols()));
                }
                state.t += 1;
                let t = state.t as i32;
                let bc1 = 1.0 - self.beta1.powi(t);
                let bc2 = 1.0 - self.beta2.powi(t);
                let m = state.m.as_mut().unwrap().data_mut();
                let v = state.v.as_mut().unwrap().data_mut();
                let p = param.data_mut();
                let g = grad.data();
                for i in 0..p.len() {
                    let gd = g[i] + wd * p[i];
                    m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gd;
                    v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gd * gd;
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    p[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_basic_rule() {
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1, 0.0, 1);
        let mut p = Tensor::scalar(1.0);
        opt.step_slot(0, &mut p, &Tensor::scalar(1.0)).unwrap();
        assert!((p.item() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn zero_learning_rate_is_bitwise_identity() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let mut opt = Optimizer::new(kind, 0.0, 0.01, 1);
            let mut p = Tensor::from_rows(&[vec![1.25, -3.5]]);
            let before = p.clone();
            opt.step_slot(0, &mut p, &Tensor::from_rows(&[vec![10.0, -4.0]]))
                .unwrap();
            assert_eq!(p.data(), before.data());
        }
    }

    #[test]
    fn sgd_pure_weight_decay() {
        // Table-style decay 0.0005: with g = 0, p <- p * (1 - lr * wd).
        let (lr, wd) = (0.1, 0.0005);
        let mut opt = Optimizer::new(OptimizerKind::Sgd, lr, wd, 1);
        let mut p = Tensor::scalar(2.0);
        opt.step_slot(0, &mut p, &Tensor::scalar(0.0)).unwrap();
        assert!((p.item() - 2.0 * (1.0 - lr * wd)).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_matches_hand_computation() {
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.001, 0.0, 1);
        let mut p = Tensor::scalar(1.0);
        opt.step_slot(0, &mut p, &Tensor::scalar(0.5)).unwrap();
        // t=1: m_hat = g, v_hat = g^2, so step = lr * g / (|g| + eps).
        let expected = 1.0 - 0.001 * 0.5 / (0.5 + 1e-8);
        assert!((p.item() - expected).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1, 0.0, 1);
        let mut p = Tensor::zeros(2, 2);
        let err = opt.step_slot(0, &mut p, &Tensor::zeros(2, 3)).unwrap_err();
        assert!(matches!(err, TensorError::ShapeMismatch { .. }));
    }
}
