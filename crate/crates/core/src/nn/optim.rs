use serde::{Deserialize, Serialize};

use super::{MlpParams, NnError};
use crate::autodiff::Array;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    SgdMomentum,
}

impl OptimizerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::SgdMomentum => "sgd_momentum",
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd_momentum" => Ok(OptimizerKind::SgdMomentum),
            other => Err(format!("unknown optimizer `{other}` (expected adam or sgd_momentum)")),
        }
    }
}

/// Adam moments, or the velocity buffer when running SGD with momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub kind: OptimizerKind,
    pub first_moment: Vec<Array>,
    pub second_moment: Vec<Array>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    /// Zero accumulators with β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn new(params: &MlpParams) -> Self {
        Self::with_kind(params, OptimizerKind::Adam)
    }

    pub fn with_kind(params: &MlpParams, kind: OptimizerKind) -> Self {
        let zeros: Vec<Array> = params.tensors().map(|t| Array::zeros(t.shape())).collect();
        Self {
            kind,
            second_moment: zeros.clone(),
            first_moment: zeros,
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One optimizer update in place.
    ///
    /// Non-finite gradients are refused before anything is modified.
    pub fn step(&mut self, params: &mut MlpParams, grads: &MlpParams, lr: f64) -> Result<(), NnError> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(NnError::InvalidConfig(format!("learning rate must be positive, got {lr}")));
        }
        if grads.layers.len() != params.layers.len()
            || grads.tensors().zip(params.tensors()).any(|(g, p)| g.shape() != p.shape())
        {
            return Err(NnError::ShapeMismatch);
        }
        if !grads.is_finite() {
            return Err(NnError::NonFiniteGradient);
        }
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let bc1 = 1.0 - b1.powi(t);
        let bc2 = 1.0 - b2.powi(t);
        for (((p, g), m), v) in params
            .tensors_mut()
            .zip(grads.tensors())
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            let p = p.values_mut();
            let g = g.values();
            let m = m.values_mut();
            match self.kind {
                OptimizerKind::Adam => {
                    let v = v.values_mut();
                    for i in 0..p.len() {
                        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                        let m_hat = m[i] / bc1;
                        let v_hat = v[i] / bc2;
                        p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
                OptimizerKind::SgdMomentum => {
                    for i in 0..p.len() {
                        m[i] = b1 * m[i] + g[i];
                        p[i] -= lr * m[i];
                    }
                }
            }
        }
        Ok(())
    }
}

/// Functional form of [`AdamState::step`].
pub fn adam_step(
    params: &MlpParams,
    grads: &MlpParams,
    state: &AdamState,
    lr: f64,
) -> Result<(MlpParams, AdamState), NnError> {
    let mut p = params.clone();
    let mut s = state.clone();
    s.step(&mut p, grads, lr)?;
    Ok((p, s))
}
