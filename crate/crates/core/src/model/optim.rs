use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Adam with decoupled weight decay.
#[derive(Clone, Debug)]
pub struct AdamW {
    pub config: AdamWConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamW {
    pub fn new(config: AdamWConfig, len: usize) -> Self {
        Self {
            config,
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * g;
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= c.lr * (mhat / (vhat.sqrt() + c.eps) + c.weight_decay * params[i]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut opt = AdamW::new(AdamWConfig { weight_decay: 0.0, ..Default::default() }, 2);
        let mut p = vec![1.0, -1.0];
        opt.step(&mut p, &[0.5, -3.0]);
        assert!((p[0] - (1.0 - 1e-4)).abs() < 1e-10);
        assert!((p[1] - (-1.0 + 1e-4)).abs() < 1e-10);
    }

    #[test]
    fn decay_without_gradient() {
        let mut opt = AdamW::new(AdamWConfig { lr: 0.1, ..Default::default() }, 1);
        let mut p = vec![2.0];
        opt.step(&mut p, &[0.0]);
        assert!((p[0] - (2.0 - 0.1 * 0.01 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut opt = AdamW::new(AdamWConfig { lr: 0.05, weight_decay: 0.0, ..Default::default() }, 1);
        let mut p = vec![3.0];
        for _ in 0..500 {
            let g = 2.0 * (p[0] - 1.0);
            opt.step(&mut p, &[g]);
        }
        assert!((p[0] - 1.0).abs() < 1e-2);
    }
}
