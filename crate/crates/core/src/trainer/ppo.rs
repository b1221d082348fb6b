//! Clipped-surrogate PPO step with imitation regularization and the
//! input-sensitivity penalty.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::weighted_imitation;
use super::rollout::RolloutBatch;
use super::PpoConfig;
use crate::alip::Action;
use crate::env::OBS_DIM;
use crate::error::{Error, Result};
use crate::nn::{gaussian_log_prob, gaussian_log_prob_grad, lipschitz_penalty, Adam, Checkpoint};

/// Means over every minibatch of the update.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PpoStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub reg_loss: f64,
    pub lipschitz: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
}

/// Optimizer state for the three parameter blocks (mean network, log-std,
/// value network). They share one step counter, which makes this the same
/// as a single Adam over the concatenation.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizers {
    mean: Adam,
    log_std: Adam,
    value: Adam,
}

impl Optimizers {
    pub fn new(ckpt: &Checkpoint, lr: f64) -> Self {
        let cfg = crate::nn::AdamConfig {
            lr,
            ..Default::default()
        };
        Self {
            mean: Adam::new(ckpt.policy.mean.num_params(), cfg),
            log_std: Adam::new(ckpt.policy.log_std.len(), cfg),
            value: Adam::new(ckpt.value.num_params(), cfg),
        }
    }
}

fn gather(src: &[f32], idx: &[usize], width: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(idx.len() * width);
    for &i in idx {
        out.extend_from_slice(&src[i * width..(i + 1) * width]);
    }
    out
}

/// Runs `epochs × minibatches` gradient steps on `batch`. `weights` are the
/// variant's effective imitation weights. On a non-finite loss or gradient
/// the parameters are restored to their state before the call.
#[allow(clippy::too_many_arguments)]
pub fn ppo_update(
    batch: &RolloutBatch,
    weights: &[f32],
    ckpt: &mut Checkpoint,
    opt: &mut Optimizers,
    cfg: &PpoConfig,
    seed: u64,
    iteration: usize,
) -> Result<PpoStats> {
    let n = batch.len();
    if batch.advantages.len() != n || batch.returns.len() != n || weights.len() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            actual: batch.advantages.len().min(weights.len()),
        });
    }
    let snapshot = (ckpt.clone(), opt.clone());
    let result = update_inner(batch, weights, ckpt, opt, cfg, seed, iteration);
    if result.is_err() {
        (*ckpt, *opt) = snapshot;
    }
    result
}

fn update_inner(
    batch: &RolloutBatch,
    weights: &[f32],
    ckpt: &mut Checkpoint,
    opt: &mut Optimizers,
    cfg: &PpoConfig,
    seed: u64,
    iteration: usize,
) -> Result<PpoStats> {
    let n = batch.len();
    let dim = Action::DIM;
    let value_scale = 1.0 / (1.0 - cfg.gamma);

    // Per-batch advantage normalization.
    let mean = batch.advantages.iter().sum::<f64>() / n as f64;
    let var = batch.advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64;
    let sd = var.sqrt().max(1e-8);
    let adv: Vec<f64> = batch.advantages.iter().map(|a| (a - mean) / sd).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Separate stream so the shuffles do not depend on whether the penalty is on.
    let mut probe_rng = ChaCha8Rng::seed_from_u64(seed);
    probe_rng.set_stream(1);
    let mut order: Vec<usize> = (0..n).collect();
    let mb_size = n / cfg.minibatches;
    let mut stats = PpoStats::default();
    let mut count = 0usize;
    let non_finite = |what| Error::NonFinite { what, iteration };

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for mb in 0..cfg.minibatches {
            let idx = &order[mb * mb_size..(mb + 1) * mb_size];
            let b = idx.len();
            let scale = 1.0 / b as f64;
            let states = gather(&batch.states, idx, OBS_DIM);
            let actions = gather(&batch.actions, idx, dim);
            let expert = gather(&batch.expert, idx, dim);
            let w: Vec<f32> = idx.iter().map(|&i| weights[i]).collect();

            let policy = &ckpt.policy;
            let cache = policy.mean.forward_batch(&states, b)?;
            let mu = cache.output();
            let mut d_mu = vec![0.0f64; b * dim];
            let mut d_log_std = vec![0.0f64; dim];
            let (mut pl, mut kl, mut clipped) = (0.0, 0.0, 0.0);
            for (j, &i) in idx.iter().enumerate() {
                let m = &mu[j * dim..(j + 1) * dim];
                let a = &actions[j * dim..(j + 1) * dim];
                let logp = gaussian_log_prob(m, &policy.log_std, a);
                let log_ratio = logp - batch.log_probs[i];
                let ratio = log_ratio.exp();
                let adv_i = adv[i];
                let clipped_ratio = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
                pl -= (ratio * adv_i).min(clipped_ratio * adv_i);
                kl += (ratio - 1.0) - log_ratio;
                if (ratio - 1.0).abs() > cfg.clip {
                    clipped += 1.0;
                }
                // The clipped branch is flat in θ; only the unclipped one
                // carries gradient, and only when it is the active minimum.
                let flat = (adv_i >= 0.0 && ratio > 1.0 + cfg.clip)
                    || (adv_i < 0.0 && ratio < 1.0 - cfg.clip);
                if !flat {
                    let g = -adv_i * ratio * scale;
                    let (gm, gs) = gaussian_log_prob_grad(m, &policy.log_std, a);
                    for k in 0..dim {
                        d_mu[j * dim + k] += g * gm[k];
                        d_log_std[k] += g * gs[k];
                    }
                }
            }
            let reg = weighted_imitation(mu, &expert, &w, scale, &mut d_mu);

            let mut g_mean = vec![0.0f32; policy.mean.num_params()];
            let d_mu32: Vec<f32> = d_mu.iter().map(|&d| d as f32).collect();
            policy.mean.backward(&cache, &d_mu32, &mut g_mean)?;

            let mut lip = 0.0;
            if cfg.lipschitz_alpha > 0.0 {
                let est = lipschitz_penalty(&policy.mean, &states, b, cfg.probe_scale, &mut probe_rng)?;
                lip = est.value;
                let alpha = cfg.lipschitz_alpha as f32;
                for (g, e) in g_mean.iter_mut().zip(&est.grad) {
                    *g += alpha * e;
                }
            }

            // Value regression in units of per-tick reward.
            let vcache = ckpt.value.forward_batch(&states, b)?;
            let mut vl = 0.0;
            let mut d_v = Vec::with_capacity(b);
            for (j, &i) in idx.iter().enumerate() {
                let target = batch.returns[i] / value_scale;
                let err = vcache.output()[j] as f64 - target;
                vl += err * err * scale;
                d_v.push((2.0 * cfg.value_coef * err * scale) as f32);
            }
            let mut g_value = vec![0.0f32; ckpt.value.num_params()];
            ckpt.value.backward(&vcache, &d_v, &mut g_value)?;

            let pl = pl * scale;
            let total = pl + cfg.value_coef * vl + reg + cfg.lipschitz_alpha * lip;
            if !total.is_finite() {
                return Err(non_finite("loss"));
            }

            let mut g_mean: Vec<f64> = g_mean.iter().map(|&g| g as f64).collect();
            let mut g_value: Vec<f64> = g_value.iter().map(|&g| g as f64).collect();
            let norm = g_mean
                .iter()
                .chain(&d_log_std)
                .chain(&g_value)
                .map(|g| g * g)
                .sum::<f64>()
                .sqrt();
            if !norm.is_finite() {
                return Err(non_finite("gradient"));
            }
            if norm > cfg.max_grad_norm {
                let c = cfg.max_grad_norm / norm;
                for g in g_mean.iter_mut().chain(&mut d_log_std).chain(&mut g_value) {
                    *g *= c;
                }
            }
            opt.mean.update(ckpt.policy.mean.params_mut(), &g_mean);
            opt.log_std.update(&mut ckpt.policy.log_std, &d_log_std);
            opt.value.update(ckpt.value.params_mut(), &g_value);

            stats.policy_loss += pl;
            stats.value_loss += vl;
            stats.reg_loss += reg;
            stats.lipschitz += lip;
            stats.approx_kl += kl * scale;
            stats.clip_fraction += clipped * scale;
            stats.grad_norm += norm;
            count += 1;
        }
    }
    if !ckpt.is_finite() {
        return Err(non_finite("parameters"));
    }
    let c = count as f64;
    Ok(PpoStats {
        policy_loss: stats.policy_loss / c,
        value_loss: stats.value_loss / c,
        reg_loss: stats.reg_loss / c,
        lipschitz: stats.lipschitz / c,
        approx_kl: stats.approx_kl / c,
        clip_fraction: stats.clip_fraction / c,
        grad_norm: stats.grad_norm / c,
    })
}
