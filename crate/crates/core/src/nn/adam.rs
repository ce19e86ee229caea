use serde::{Deserialize, Serialize};

use super::Parameters;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(lr: f64, params: &impl Parameters) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.2.len()]).collect();
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One bias-corrected update. Parameters are left untouched when any
    /// gradient is non-finite.
    pub fn update<P: Parameters>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let grads = grads.tensors();
        if grads.len() != self.m.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} gradient tensors for {} moment buffers",
                grads.len(),
                self.m.len()
            )));
        }
        for (name, _, g) in &grads {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient(name.clone()));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (k, p) in params.slices_mut().into_iter().enumerate() {
            let g = grads[k].2;
            if g.len() != p.len() || p.len() != self.m[k].len() {
                return Err(Error::ShapeMismatch(format!("tensor `{}` size changed", grads[k].0)));
            }
            for i in 0..p.len() {
                self.m[k][i] = self.beta1 * self.m[k][i] + (1.0 - self.beta1) * g[i];
                self.v[k][i] = self.beta2 * self.v[k][i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = self.m[k][i] / c1;
                let v_hat = self.v[k][i] / c2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
