//! Diagonal Gaussian policy with a state-independent learnable log-std.

use rand::Rng;
use rand_distr::StandardNormal;

use super::mlp::Mlp;
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub mean: Mlp,
    pub log_std: Vec<f32>,
}

impl GaussianPolicy {
    pub fn new(mean: Mlp, log_std: Vec<f32>) -> Result<Self> {
        if log_std.len() != mean.output_dim() {
            return Err(Error::ShapeMismatch {
                expected: mean.output_dim(),
                actual: log_std.len(),
            });
        }
        Ok(Self { mean, log_std })
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn std(&self) -> Vec<f32> {
        self.log_std.iter().map(|l| l.exp()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.mean.is_finite() && self.log_std.iter().all(|l| l.is_finite())
    }

    pub fn mean_action(&self, state: &[f32]) -> Result<Vec<f32>> {
        self.mean.forward(state)
    }

    /// `μ(s) + σ ⊙ ξ` with `ξ ~ N(0, I)`.
    pub fn sample<R: Rng>(&self, state: &[f32], rng: &mut R) -> Result<Vec<f32>> {
        let mu = self.mean.forward(state)?;
        Ok(self.sample_around(&mu, rng))
    }

    pub fn sample_around<R: Rng>(&self, mu: &[f32], rng: &mut R) -> Vec<f32> {
        mu.iter()
            .zip(&self.log_std)
            .map(|(&m, &ls)| {
                let xi: f64 = rng.sample(StandardNormal);
                m + ls.exp() * xi as f32
            })
            .collect()
    }

    pub fn log_prob(&self, state: &[f32], action: &[f32]) -> Result<f64> {
        let mu = self.mean.forward(state)?;
        if action.len() != mu.len() {
            return Err(Error::ShapeMismatch {
                expected: mu.len(),
                actual: action.len(),
            });
        }
        Ok(gaussian_log_prob(&mu, &self.log_std, action))
    }
}

/// Log-density of a diagonal Gaussian, accumulated in `f64`.
pub fn gaussian_log_prob(mu: &[f32], log_std: &[f32], action: &[f32]) -> f64 {
    mu.iter()
        .zip(log_std)
        .zip(action)
        .map(|((&m, &ls), &a)| {
            let z = (a as f64 - m as f64) / (ls as f64).exp();
            -0.5 * z * z - ls as f64 - 0.5 * LN_2PI
        })
        .sum()
}

/// Gradients of [`gaussian_log_prob`] with respect to the mean and log-std.
pub fn gaussian_log_prob_grad(mu: &[f32], log_std: &[f32], action: &[f32]) -> (Vec<f64>, Vec<f64>) {
    let mut d_mu = Vec::with_capacity(mu.len());
    let mut d_ls = Vec::with_capacity(mu.len());
    for ((&m, &ls), &a) in mu.iter().zip(log_std).zip(action) {
        let inv_var = (-2.0 * ls as f64).exp();
        let diff = a as f64 - m as f64;
        d_mu.push(diff * inv_var);
        d_ls.push(diff * diff * inv_var - 1.0);
    }
    (d_mu, d_ls)
}

pub fn gaussian_entropy(log_std: &[f32]) -> f64 {
    log_std
        .iter()
        .map(|&ls| ls as f64 + 0.5 * (1.0 + LN_2PI))
        .sum()
}
