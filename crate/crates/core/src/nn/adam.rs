use serde::{Deserialize, Serialize};

use super::params::Parameterized;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Rescale the combined gradient to at most this L2 norm before the update.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: None,
        }
    }
}

/// Adam with bias correction. One state covers a fixed, ordered group of
/// parameter tensors, flattened.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    config: AdamConfig,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(config: AdamConfig, param_count: usize) -> Self {
        AdamState {
            config,
            step: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        }
    }

    /// State for the concatenated parameters of `models`.
    pub fn for_models(config: AdamConfig, models: &[&dyn Parameterized]) -> Self {
        Self::new(config, models.iter().map(|m| m.param_count()).sum())
    }

    pub fn from_parts(config: AdamConfig, step: u64, m: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if m.len() != v.len() {
            return Err(invalid("Adam moment vectors differ in length"));
        }
        Ok(AdamState { config, step, m, v })
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    pub fn step_flat(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(invalid(format!(
                "Adam state holds {} parameters, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        let c = self.config;
        let scale = match c.clip_norm {
            Some(limit) => {
                let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > limit {
                    limit / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i] * scale;
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * g;
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
        }
        Ok(())
    }

    /// Updates `models` in place from matching gradient accumulators.
    pub fn step(
        &mut self,
        models: &mut [&mut dyn Parameterized],
        grads: &[&dyn Parameterized],
    ) -> Result<()> {
        if models.len() != grads.len() {
            return Err(invalid("Adam step: model and gradient groups differ in length"));
        }
        let mut flat = Vec::with_capacity(self.m.len());
        let mut flat_grads = Vec::with_capacity(self.m.len());
        for (m, g) in models.iter().zip(grads) {
            if m.param_count() != g.param_count() {
                return Err(invalid("Adam step: gradient shape does not match its model"));
            }
            flat.extend(m.to_flat());
            flat_grads.extend(g.to_flat());
        }
        self.step_flat(&mut flat, &flat_grads)?;
        let mut offset = 0;
        for m in models.iter_mut() {
            let n = m.param_count();
            m.set_from_flat(&flat[offset..offset + n])?;
            offset += n;
        }
        Ok(())
    }
}
