//! DAgger pre-training and regularized PPO fine-tuning.
//!
//! Variants differ only in the per-sample weight on the expert-imitation term:
//!
//! | variant   | init       | weight          |
//! |-----------|------------|-----------------|
//! | `purerl`  | random     | 0               |
//! | `ifm`     | pretrained | 0               |
//! | `fullreg` | pretrained | `w0`            |
//! | `ppf`     | pretrained | `w0·exp(−ż²/δ)` |

mod dagger;
mod finetune;
mod gae;
mod loss;
mod ppo;
mod probe;
mod rollout;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::alip::MarConfig;
use crate::env::OBS_DIM;
use crate::error::{Error, Result};
use crate::nn::{Checkpoint, CheckpointMeta, GaussianPolicy, Mlp};

pub use dagger::{dagger_pretrain, PretrainOutcome};
pub use probe::{jacobian_sq_norm, probe_policy, PolicyProbe};
pub use finetune::{finetune, write_metrics_csv, FinetuneOutcome, IterationMetrics, METRICS_HEADER};
pub use gae::compute_gae;
pub use loss::{effective_weights, regularization_loss};
pub use ppo::{ppo_update, Optimizers, PpoStats};
pub use rollout::{collect_rollouts, EpisodeRecord, RolloutBatch, TerrainSchedule, VecEnv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    PureRl,
    Ifm,
    FullReg,
    Ppf,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::PureRl, Variant::Ifm, Variant::FullReg, Variant::Ppf];

    pub fn name(self) -> &'static str {
        match self {
            Variant::PureRl => "purerl",
            Variant::Ifm => "ifm",
            Variant::FullReg => "fullreg",
            Variant::Ppf => "ppf",
        }
    }

    /// Whether the variant starts from a pretrained checkpoint.
    pub fn requires_init(self) -> bool {
        !matches!(self, Variant::PureRl)
    }

    pub fn uses_expert(self) -> bool {
        matches!(self, Variant::FullReg | Variant::Ppf)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown variant `{s}` (expected purerl, ifm, fullreg or ppf)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoConfig {
    pub clip: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub lr: f64,
    /// Weight of the input-sensitivity penalty.
    pub lipschitz_alpha: f64,
    pub probe_scale: f32,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip: 0.2,
            gamma: 0.99,
            lambda: 0.95,
            epochs: 4,
            minibatches: 4,
            value_coef: 0.5,
            max_grad_norm: 1.0,
            lr: 3e-4,
            lipschitz_alpha: 1e-4,
            probe_scale: crate::nn::lipschitz::DEFAULT_PROBE_SCALE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DaggerConfig {
    pub iterations: usize,
    /// Control ticks per environment per iteration.
    pub rollout_ticks: usize,
    pub buffer_cap: usize,
    /// Regression passes over the buffer per iteration.
    pub passes: usize,
    pub minibatch: usize,
    pub lr: f64,
    /// `β_i = beta_decay^i`.
    pub beta_decay: f64,
    /// Terrain levels are drawn uniformly from `[0, max_level]`.
    pub max_level: f64,
}

impl Default for DaggerConfig {
    fn default() -> Self {
        Self {
            iterations: 50,
            rollout_ticks: 128,
            buffer_cap: 1_000_000,
            passes: 5,
            minibatch: 256,
            lr: 1e-3,
            beta_decay: 0.5,
            max_level: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub variant: Variant,
    pub ppo: PpoConfig,
    pub dagger: DaggerConfig,
    pub mar: MarConfig,
    pub num_envs: usize,
    /// Control ticks per environment per iteration.
    pub horizon: usize,
    pub iterations: usize,
    pub hidden: Vec<usize>,
    /// Initial policy standard deviation, all action dimensions.
    pub init_std: f64,
    pub seed: u64,
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Ppf,
            ppo: PpoConfig::default(),
            dagger: DaggerConfig::default(),
            mar: MarConfig::default(),
            num_envs: 16,
            horizon: 2048,
            iterations: 300,
            hidden: vec![64, 64],
            init_std: 0.05,
            seed: 0,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        let p = &self.ppo;
        if !(p.clip > 0.0 && p.clip < 1.0) {
            return bad("ppo clip must be in (0, 1)");
        }
        if !(p.gamma > 0.0 && p.gamma < 1.0) {
            return bad("gamma must be in (0, 1)");
        }
        if !(0.0..=1.0).contains(&p.lambda) {
            return bad("lambda must be in [0, 1]");
        }
        if p.epochs == 0 || p.minibatches == 0 {
            return bad("epochs and minibatches must be >= 1");
        }
        if !(p.value_coef >= 0.0 && p.max_grad_norm > 0.0 && p.lr > 0.0) {
            return bad("value coef must be >= 0, grad clip and lr > 0");
        }
        if !(p.lipschitz_alpha >= 0.0 && p.probe_scale > 0.0) {
            return bad("lipschitz alpha must be >= 0 and probe scale > 0");
        }
        let d = &self.dagger;
        if d.rollout_ticks == 0 || d.passes == 0 || d.minibatch == 0 || d.buffer_cap == 0 {
            return bad("dagger sizes must be >= 1");
        }
        if !(d.lr > 0.0 && (0.0..=1.0).contains(&d.beta_decay)) {
            return bad("dagger lr must be > 0 and beta decay in [0, 1]");
        }
        if !(0.0..=1.0).contains(&d.max_level) {
            return bad("dagger max level must be in [0, 1]");
        }
        if self.num_envs == 0 || self.horizon == 0 {
            return bad("env count and horizon must be >= 1");
        }
        if self.num_envs * self.horizon < p.minibatches {
            return bad("fewer samples per iteration than minibatches");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer sizes must be >= 1");
        }
        if !(self.init_std > 0.0 && self.init_std.is_finite()) {
            return bad("initial std must be > 0");
        }
        if self.workers == 0 {
            return bad("workers must be >= 1");
        }
        Ok(())
    }

    pub fn policy_sizes(&self) -> Vec<usize> {
        let mut s = vec![OBS_DIM];
        s.extend(&self.hidden);
        s.push(crate::alip::Action::DIM);
        s
    }

    pub fn value_sizes(&self) -> Vec<usize> {
        let mut s = vec![OBS_DIM];
        s.extend(&self.hidden);
        s.push(1);
        s
    }

    /// Fresh networks drawn from `seed`.
    pub fn init_checkpoint(&self, seed: u64) -> Result<Checkpoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mean = Mlp::random(&self.policy_sizes(), 0.01, &mut rng)?;
        let value = Mlp::random(&self.value_sizes(), 1.0, &mut rng)?;
        let log_std = vec![self.init_std.ln() as f32; crate::alip::Action::DIM];
        Ok(Checkpoint {
            policy: GaussianPolicy::new(mean, log_std)?,
            value,
            meta: CheckpointMeta {
                iteration: 0,
                seed,
                variant: self.variant.name().into(),
            },
        })
    }
}

/// Derives an independent stream seed from a base seed and labels.
pub(crate) fn sub_seed(base: u64, labels: &[u64]) -> u64 {
    // SplitMix64 finalizer over the folded labels.
    let mut z = base ^ 0x9e37_79b9_7f4a_7c15;
    for &l in labels {
        z = z.wrapping_add(l.wrapping_mul(0xbf58_476d_1ce4_e5b9)).wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("ppo".parse::<Variant>().is_err());
        assert!(!Variant::PureRl.requires_init());
        assert!(Variant::Ifm.requires_init() && !Variant::Ifm.uses_expert());
    }

    #[test]
    fn defaults_are_valid() {
        TrainConfig::default().validate().unwrap();
        let mut c = TrainConfig::default();
        c.ppo.clip = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn sub_seeds_differ() {
        let a = sub_seed(1, &[0, 0]);
        assert_ne!(a, sub_seed(1, &[0, 1]));
        assert_ne!(a, sub_seed(2, &[0, 0]));
        assert_eq!(a, sub_seed(1, &[0, 0]));
    }
}
