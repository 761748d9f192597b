//! Adam / AdamW with bias correction.

use crate::numerics::Tensor;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    AdamW,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for OptimizerHyper {
    fn default() -> Self {
        OptimizerHyper { lr: 1e-3, beta1: 0.9, beta2: 0.95, eps: 1e-8, weight_decay: 0.0 }
    }
}

/// First/second moment accumulators for a fixed, ordered parameter list.
#[derive(Debug, Clone)]
pub struct AdamState {
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(params: &[&Tensor]) -> Self {
        AdamState {
            step: 0,
            m: params.iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One update over the whole parameter list. `adam` folds weight decay into
/// the gradient (classic L2); `adamw` decays the weights directly. Both are
/// identical when `weight_decay` is zero.
pub fn optimizer_step(
    kind: OptimizerKind,
    params: &mut [&mut Tensor],
    grads: &[&Tensor],
    state: &mut AdamState,
    hyper: &OptimizerHyper,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::ShapeMismatch {
            op: "optimizer_step",
            detail: format!(
                "{} params, {} grads, state for {}",
                params.len(),
                grads.len(),
                state.m.len()
            ),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - hyper.beta1.powi(t);
    let bc2 = 1.0 - hyper.beta2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        if p.shape() != g.shape() {
            return Err(Error::ShapeMismatch {
                op: "optimizer_step",
                detail: format!("param {:?} vs grad {:?}", p.shape(), g.shape()),
            });
        }
        if !g.all_finite() {
            return Err(Error::NonFinite { op: "optimizer_step" });
        }
        for i in 0..p.len() {
            let mut gi = g.data()[i];
            let pi = p.data()[i];
            if matches!(kind, OptimizerKind::Adam) && hyper.weight_decay != 0.0 {
                gi += hyper.weight_decay * pi;
            }
            let mi = hyper.beta1 * m.data()[i] + (1.0 - hyper.beta1) * gi;
            let vi = hyper.beta2 * v.data()[i] + (1.0 - hyper.beta2) * gi * gi;
            m.data_mut()[i] = mi;
            v.data_mut()[i] = vi;
            let m_hat = mi / bc1;
            let v_hat = vi / bc2;
            let mut step = hyper.lr * m_hat / (v_hat.sqrt() + hyper.eps);
            if matches!(kind, OptimizerKind::AdamW) && hyper.weight_decay != 0.0 {
                step += hyper.lr * hyper.weight_decay * pi;
            }
            p.data_mut()[i] = pi - step;
        }
    }
    Ok(())
}
