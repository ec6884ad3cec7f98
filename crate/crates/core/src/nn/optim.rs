use serde::{Deserialize, Serialize};

use super::{Matrix, ParamStore};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Gradient step on the grad slots of a [`ParamStore`], after global-norm clipping.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    clip_norm: f64,
    moments: Vec<(Matrix, Matrix)>,
    steps: u64,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, clip_norm: f64) -> Self {
        Self {
            kind,
            lr,
            clip_norm,
            moments: Vec::new(),
            steps: 0,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies and then clears the accumulated gradients. Returns the pre-clip norm.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<f64> {
        let norm = store.grad_norm();
        if !norm.is_finite() {
            return Err(Error::Divergence(format!("gradient norm {norm}")));
        }
        let scale = if norm > self.clip_norm {
            self.clip_norm / norm
        } else {
            1.0
        };
        self.steps += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for p in store.iter_mut() {
                    for (v, g) in p.value.data_mut().iter_mut().zip(p.grad.data()) {
                        *v -= self.lr * scale * g;
                    }
                }
            }
            OptimizerKind::Adam => {
                if self.moments.is_empty() {
                    self.moments = store
                        .iter()
                        .map(|(_, p)| {
                            let (r, c) = p.value.shape();
                            (Matrix::zeros(r, c), Matrix::zeros(r, c))
                        })
                        .collect();
                }
                let t = self.steps as i32;
                let c1 = 1.0 - BETA1.powi(t);
                let c2 = 1.0 - BETA2.powi(t);
                for (p, (m, v)) in store.iter_mut().zip(&mut self.moments) {
                    let grads = p.grad.data();
                    let values = p.value.data_mut();
                    for (((x, &g), mi), vi) in values
                        .iter_mut()
                        .zip(grads)
                        .zip(m.data_mut())
                        .zip(v.data_mut())
                    {
                        let g = g * scale;
                        *mi = BETA1 * *mi + (1.0 - BETA1) * g;
                        *vi = BETA2 * *vi + (1.0 - BETA2) * g * g;
                        *x -= self.lr * (*mi / c1) / ((*vi / c2).sqrt() + ADAM_EPS);
                    }
                }
            }
        }
        store.zero_grad();
        Ok(norm)
    }
}
