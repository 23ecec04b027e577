use serde::{Deserialize, Serialize};

use super::tensor::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.0 }
    }
}

/// Adam with optional L2 weight decay added to the gradient.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: usize) -> Self {
        Self { config, step: 0, m: vec![0.0; params], v: vec![0.0; params] }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step<T: Real>(&mut self, params: &mut [T], grads: &[T]) {
        assert_eq!(params.len(), self.m.len(), "optimizer built for a different parameter count");
        assert_eq!(params.len(), grads.len());
        self.step += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let p = params[i].f64();
            let g = grads[i].f64() + c.weight_decay * p;
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * g;
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * g * g;
            let update = c.lr * (self.m[i] / bc1) / ((self.v[i] / bc2).sqrt() + c.eps);
            params[i] = T::of(p - update);
        }
    }
}
