use serde::{Deserialize, Serialize};

use crate::error::{check_dim, LearnError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: vec![0.0; n_params], v: vec![0.0; n_params] }
    }

    /// One bias-corrected step. Non-finite gradients are rejected before
    /// anything is modified.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        check_dim("adam params", self.m.len(), params.len())?;
        check_dim("adam grads", self.m.len(), grads.len())?;
        if !grads.iter().all(|g| g.is_finite()) {
            return Err(LearnError::NonFinite("gradient"));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Rescales all gradient blocks jointly so their global L2 norm is at most
/// `max_norm`. Returns the norm before clipping.
pub fn clip_grad_norm(blocks: &mut [&mut [f64]], max_norm: f64) -> f64 {
    let norm = blocks.iter().flat_map(|b| b.iter()).map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm.is_finite() {
        let s = max_norm / norm;
        for b in blocks.iter_mut() {
            b.iter_mut().for_each(|g| *g *= s);
        }
    }
    norm
}
