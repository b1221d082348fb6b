#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam over a flat parameter buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(num_params: usize, config: AdamConfig) -> Self {
        Self {
            config,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn update(&mut self, params: &mut [f32], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len(), "parameter length mismatch");
        assert_eq!(grads.len(), self.m.len(), "gradient length mismatch");
        self.t += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * g;
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= (c.lr * m_hat / (v_hat.sqrt() + c.eps)) as f32;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = vec![0.5f32, -1.0, 2.0];
        let before = p.clone();
        let mut adam = Adam::new(3, AdamConfig::default());
        for _ in 0..5 {
            adam.update(&mut p, &[0.0; 3]);
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_is_sign_like() {
        let cfg = AdamConfig {
            lr: 0.01,
            ..AdamConfig::default()
        };
        let g = [0.3, -2.0, 1e-4];
        let mut p = vec![0.0f32; 3];
        let mut adam = Adam::new(3, cfg);
        adam.update(&mut p, &g);
        for i in 0..3 {
            let expected = -cfg.lr * g[i] / (g[i].abs() + cfg.eps);
            assert!((p[i] as f64 - expected).abs() < 1e-7, "{} vs {expected}", p[i]);
        }
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut p = vec![1.0f32, 2.0];
            let mut adam = Adam::new(2, AdamConfig::default());
            for k in 0..10 {
                adam.update(&mut p, &[k as f64 * 0.1, -0.3]);
            }
            p
        };
        assert_eq!(run(), run());
    }
}
