//! Stochastic input-sensitivity penalty.
//!
//! For a probe `u ~ N(0, I)` the quantity `‖μ(s + εu) − μ(s)‖² / ε²` has
//! expectation `‖J(s)‖²_F` as `ε → 0`, and is differentiable through both
//! forward passes with ordinary first-order backprop.

use rand::Rng;
use rand_distr::StandardNormal;

use super::mlp::Mlp;
use crate::error::{Error, Result};

pub const DEFAULT_PROBE_SCALE: f32 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzEstimate {
    /// Batch mean of the per-sample estimates.
    pub value: f64,
    /// Gradient of `value` with respect to the network parameters.
    pub grad: Vec<f32>,
}

/// Draws one standard-normal probe per sample and evaluates the penalty.
pub fn lipschitz_penalty<R: Rng>(
    net: &Mlp,
    inputs: &[f32],
    batch: usize,
    eps: f32,
    rng: &mut R,
) -> Result<LipschitzEstimate> {
    let probes: Vec<f32> = (0..inputs.len())
        .map(|_| {
            let u: f64 = rng.sample(StandardNormal);
            u as f32
        })
        .collect();
    lipschitz_penalty_with_probes(net, inputs, &probes, batch, eps)
}

pub fn lipschitz_penalty_with_probes(
    net: &Mlp,
    inputs: &[f32],
    probes: &[f32],
    batch: usize,
    eps: f32,
) -> Result<LipschitzEstimate> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidConfig(format!("probe scale must be positive, got {eps}")));
    }
    if probes.len() != inputs.len() {
        return Err(Error::ShapeMismatch {
            expected: inputs.len(),
            actual: probes.len(),
        });
    }
    let shifted: Vec<f32> = inputs.iter().zip(probes).map(|(&s, &u)| s + eps * u).collect();
    let c0 = net.forward_batch(inputs, batch)?;
    let c1 = net.forward_batch(&shifted, batch)?;
    let inv_eps2 = 1.0 / (eps as f64 * eps as f64);
    let scale = if batch == 0 { 0.0 } else { 1.0 / batch as f64 };
    let mut value = 0.0f64;
    let mut d1 = Vec::with_capacity(c0.output().len());
    for (&a, &b) in c0.output().iter().zip(c1.output()) {
        let diff = b as f64 - a as f64;
        value += diff * diff;
        d1.push((2.0 * diff * inv_eps2 * scale) as f32);
    }
    let d0: Vec<f32> = d1.iter().map(|d| -d).collect();
    let mut grad = vec![0.0f32; net.num_params()];
    net.backward(&c1, &d1, &mut grad)?;
    net.backward(&c0, &d0, &mut grad)?;
    Ok(LipschitzEstimate {
        value: value * inv_eps2 * scale,
        grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_network_has_zero_penalty() {
        let mut net = Mlp::zeros(&[3, 5, 2]).unwrap();
        let (_, b) = net.layer_range(1);
        for p in &mut net.params_mut()[b] {
            *p = 0.7;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let est = lipschitz_penalty(&net, &[0.1; 12], 4, 1e-3, &mut rng).unwrap();
        assert_eq!(est.value, 0.0);
        assert!(est.grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn non_positive_probe_scale_is_rejected() {
        let net = Mlp::zeros(&[2, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(lipschitz_penalty(&net, &[0.0; 2], 1, 0.0, &mut rng).is_err());
        assert!(lipschitz_penalty(&net, &[0.0; 2], 1, -1.0, &mut rng).is_err());
    }

    #[test]
    fn homogeneity_in_weight_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::random(&[4, 3], 1.0, &mut rng).unwrap();
        let mut doubled = net.clone();
        for p in doubled.params_mut() {
            *p *= 2.0;
        }
        let x = [0.3f32, -0.2, 0.5, 0.1];
        let u = [0.4f32, 1.1, -0.7, 0.2];
        let a = lipschitz_penalty_with_probes(&net, &x, &u, 1, 1e-2).unwrap();
        let b = lipschitz_penalty_with_probes(&doubled, &x, &u, 1, 1e-2).unwrap();
        assert!((b.value / a.value - 4.0).abs() < 1e-3);
    }
}
