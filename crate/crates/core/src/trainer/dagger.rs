//! Imitation pre-training with dataset aggregation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::rollout::{to64, TerrainSchedule, VecEnv};
use super::{sub_seed, TrainConfig};
use crate::alip::Action;
use crate::env::{policy_input, EnvConfig, TerrainKind, OBS_DIM};
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamConfig, Checkpoint, Mlp};

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub checkpoint: Checkpoint,
    /// Mean squared action error over the final regression pass of each
    /// iteration.
    pub loss_curve: Vec<f64>,
    pub samples_seen: usize,
}

/// Ring buffer of (scaled observation, expert action) pairs.
struct Buffer {
    cap: usize,
    next: usize,
    states: Vec<f32>,
    labels: Vec<f32>,
}

impl Buffer {
    fn len(&self) -> usize {
        self.labels.len() / Action::DIM
    }

    fn push(&mut self, state: &[f32], label: &[f32]) {
        if self.len() < self.cap {
            self.states.extend_from_slice(state);
            self.labels.extend_from_slice(label);
        } else {
            let i = self.next;
            self.states[i * OBS_DIM..(i + 1) * OBS_DIM].copy_from_slice(state);
            self.labels[i * Action::DIM..(i + 1) * Action::DIM].copy_from_slice(label);
        }
        self.next = (self.next + 1) % self.cap;
    }
}

/// One Adam step on `mean ‖label − μ(s)‖²` over the given samples.
fn regression_step(
    net: &mut Mlp,
    adam: &mut Adam,
    states: &[f32],
    labels: &[f32],
    b: usize,
) -> Result<f64> {
    let cache = net.forward_batch(states, b)?;
    let scale = 1.0 / b as f64;
    let mut loss = 0.0;
    let d: Vec<f32> = cache
        .output()
        .iter()
        .zip(labels)
        .map(|(&m, &l)| {
            let e = m as f64 - l as f64;
            loss += e * e * scale;
            (2.0 * e * scale) as f32
        })
        .collect();
    let mut grad = vec![0.0f32; net.num_params()];
    net.backward(&cache, &d, &mut grad)?;
    let grad: Vec<f64> = grad.iter().map(|&g| g as f64).collect();
    adam.update(net.params_mut(), &grad);
    Ok(loss)
}

/// Pre-trains the policy mean to reproduce the expert.
///
/// Iteration `i` executes the expert with probability `β_i` on each tick and
/// the current policy mean otherwise; every visited state is labelled with the
/// expert action, added to a capped buffer, and the mean network is regressed
/// onto the whole buffer for `passes` epochs.
pub fn dagger_pretrain(cfg: &TrainConfig, env_cfg: &EnvConfig) -> Result<PretrainOutcome> {
    cfg.validate()?;
    let d = cfg.dagger;
    let mut ckpt = cfg.init_checkpoint(sub_seed(cfg.seed, &[10]))?;
    ckpt.meta.variant = "pretrain".into();
    let schedule = TerrainSchedule::Uniform {
        kinds: TerrainKind::CURRICULUM.to_vec(),
        max_level: d.max_level,
    };
    let mut envs = VecEnv::new(env_cfg, cfg.num_envs, schedule, sub_seed(cfg.seed, &[11]), cfg.workers)?;
    let mut buffer = Buffer {
        cap: d.buffer_cap,
        next: 0,
        states: Vec::new(),
        labels: Vec::new(),
    };
    let mut adam = Adam::new(
        ckpt.policy.mean.num_params(),
        AdamConfig {
            lr: d.lr,
            ..AdamConfig::default()
        },
    );
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, &[12]));
    let mut loss_curve = Vec::with_capacity(d.iterations);
    let mut seen = 0;

    for it in 0..d.iterations {
        let beta = d.beta_decay.powi(it as i32);
        let policy = &ckpt.policy;
        let segments = envs.for_each_slot(|slot, schedule| {
            let mut out = Vec::with_capacity(d.rollout_ticks);
            for _ in 0..d.rollout_ticks {
                let input = policy_input(&slot.obs);
                let expert = slot.expert();
                let use_expert = slot.rng.random::<f64>() < beta;
                let action = if use_expert {
                    expert
                } else {
                    Action::from_slice(&to64(&policy.mean.forward(&input)?))
                };
                let label: Vec<f32> = expert.to_array().iter().map(|&v| v as f32).collect();
                out.push((input, label));
                slot.step(&action, schedule)?;
            }
            Ok(out)
        })?;
        for seg in segments {
            for (s, l) in seg {
                buffer.push(&s, &l);
                seen += 1;
            }
        }
        // Episodes are not used for anything here.
        for slot in &mut envs.slots {
            slot.records.clear();
        }

        let n = buffer.len();
        let b = d.minibatch.min(n);
        let mut order: Vec<usize> = (0..n).collect();
        let mut last_pass = 0.0;
        for _ in 0..d.passes {
            order.shuffle(&mut rng);
            let mut pass_loss = 0.0;
            let mut steps = 0;
            for chunk in order.chunks(b) {
                let mut s = Vec::with_capacity(chunk.len() * OBS_DIM);
                let mut l = Vec::with_capacity(chunk.len() * Action::DIM);
                for &i in chunk {
                    s.extend_from_slice(&buffer.states[i * OBS_DIM..(i + 1) * OBS_DIM]);
                    l.extend_from_slice(&buffer.labels[i * Action::DIM..(i + 1) * Action::DIM]);
                }
                let loss =
                    regression_step(&mut ckpt.policy.mean, &mut adam, &s, &l, chunk.len())?;
                if !loss.is_finite() || !ckpt.policy.mean.is_finite() {
                    return Err(Error::NonFinite {
                        what: "imitation loss",
                        iteration: it,
                    });
                }
                pass_loss += loss;
                steps += 1;
            }
            last_pass = pass_loss / steps as f64;
        }
        loss_curve.push(last_pass);
    }
    ckpt.meta.iteration = d.iterations as u64;
    Ok(PretrainOutcome {
        checkpoint: ckpt,
        loss_curve,
        samples_seen: seen,
    })
}
