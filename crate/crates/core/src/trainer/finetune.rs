use std::io::Write;
use std::path::Path;

use super::loss::effective_weights;
use super::ppo::{ppo_update, Optimizers};
use super::rollout::{collect_rollouts, TerrainSchedule, VecEnv};
use super::{sub_seed, TrainConfig, Variant};
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::nn::{Architecture, Checkpoint};

pub const METRICS_HEADER: &str = "iteration,samples,mean_reward,episode_return,episodes,falls,\
lin_tracking,ang_tracking,mean_w,reg_loss,lipschitz,terrain_level,forward_max,policy_loss,\
value_loss,approx_kl,clip_fraction,mean_std";

#[derive(Debug, Clone, PartialEq)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub samples: usize,
    pub mean_reward: f64,
    /// Mean return of episodes that finished this iteration (NaN if none;
    /// written as an empty field).
    pub episode_return: f64,
    pub episodes: usize,
    pub falls: usize,
    pub lin_tracking: f64,
    pub ang_tracking: f64,
    /// Mean effective imitation weight.
    pub mean_w: f64,
    pub reg_loss: f64,
    pub lipschitz: f64,
    pub terrain_level: f64,
    pub forward_max: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub mean_std: f64,
}

impl IterationMetrics {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.iteration,
            self.samples,
            self.mean_reward,
            if self.episode_return.is_nan() {
                String::new()
            } else {
                self.episode_return.to_string()
            },
            self.episodes,
            self.falls,
            self.lin_tracking,
            self.ang_tracking,
            self.mean_w,
            self.reg_loss,
            self.lipschitz,
            self.terrain_level,
            self.forward_max,
            self.policy_loss,
            self.value_loss,
            self.approx_kl,
            self.clip_fraction,
            self.mean_std
        )
    }
}

pub fn write_metrics_csv(path: &Path, rows: &[IterationMetrics]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{METRICS_HEADER}")?;
    for r in rows {
        writeln!(f, "{}", r.to_csv_line())?;
    }
    f.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct FinetuneOutcome {
    pub checkpoint: Checkpoint,
    pub metrics: Vec<IterationMetrics>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// PPO fine-tuning on the terrain curriculum.
///
/// `init` must be present for every variant except `purerl`, and absent for
/// `purerl`. If `out_dir` is given, `metrics.csv` and `final.ckpt` are written
/// there; on a non-finite update the last good parameters are saved as
/// `last_good.ckpt` before the error is returned.
pub fn finetune(
    cfg: &TrainConfig,
    env_cfg: &EnvConfig,
    init: Option<Checkpoint>,
    out_dir: Option<&Path>,
) -> Result<FinetuneOutcome> {
    cfg.validate()?;
    let mut ckpt = match (cfg.variant.requires_init(), init) {
        (true, None) => {
            return Err(Error::InvalidConfig(format!(
                "variant {} requires a pretrained checkpoint",
                cfg.variant
            )))
        }
        (false, Some(_)) => {
            return Err(Error::InvalidConfig(
                "variant purerl starts from scratch and takes no checkpoint".into(),
            ))
        }
        (true, Some(c)) => {
            let expected = Architecture {
                policy: cfg.policy_sizes(),
                value: cfg.value_sizes(),
            };
            if c.architecture() != expected {
                return Err(Error::Checkpoint(format!(
                    "architecture mismatch: config wants {:?}, checkpoint has {:?}",
                    expected,
                    c.architecture()
                )));
            }
            c
        }
        (false, None) => cfg.init_checkpoint(sub_seed(cfg.seed, &[3]))?,
    };
    debug_assert!(cfg.variant != Variant::PureRl || ckpt.meta.iteration == 0);
    ckpt.meta.seed = cfg.seed;
    ckpt.meta.variant = cfg.variant.name().into();

    let mut envs = VecEnv::new(
        env_cfg,
        cfg.num_envs,
        TerrainSchedule::curriculum(),
        sub_seed(cfg.seed, &[1]),
        cfg.workers,
    )?;
    let mut opt = Optimizers::new(&ckpt, cfg.ppo.lr);
    let mut metrics = Vec::with_capacity(cfg.iterations);

    for it in 0..cfg.iterations {
        let mut batch = collect_rollouts(&ckpt, &mut envs, cfg.horizon, cfg.ppo.gamma)?;
        batch.compute_advantages(cfg.ppo.gamma, cfg.ppo.lambda)?;
        let weights = effective_weights(&batch, cfg.variant, &cfg.mar)?;
        let stats = match ppo_update(
            &batch,
            &weights,
            &mut ckpt,
            &mut opt,
            &cfg.ppo,
            sub_seed(cfg.seed, &[2, it as u64]),
            it,
        ) {
            Ok(s) => s,
            Err(e) => {
                if let Some(dir) = out_dir {
                    ckpt.meta.iteration = it as u64;
                    ckpt.save(&dir.join("last_good.ckpt"))?;
                    write_metrics_csv(&dir.join("metrics.csv"), &metrics)?;
                }
                return Err(e);
            }
        };
        let n = batch.len();
        metrics.push(IterationMetrics {
            iteration: it,
            samples: n,
            mean_reward: batch.env_rewards.iter().sum::<f64>() / n as f64,
            episode_return: mean(batch.episodes.iter().map(|e| e.episode_return)),
            episodes: batch.episodes.len(),
            falls: batch.episodes.iter().filter(|e| e.reason.is_failure()).count(),
            lin_tracking: mean(batch.lin_tracking.iter().copied()),
            ang_tracking: mean(batch.ang_tracking.iter().copied()),
            mean_w: mean(weights.iter().map(|&w| w as f64)),
            reg_loss: stats.reg_loss,
            lipschitz: stats.lipschitz,
            terrain_level: envs.mean_terrain_level(),
            forward_max: envs.mean_forward_max(),
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            approx_kl: stats.approx_kl,
            clip_fraction: stats.clip_fraction,
            mean_std: mean(ckpt.policy.log_std.iter().map(|&l| (l as f64).exp())),
        });
    }
    ckpt.meta.iteration = cfg.iterations as u64;
    if let Some(dir) = out_dir {
        write_metrics_csv(&dir.join("metrics.csv"), &metrics)?;
        ckpt.save(&dir.join("final.ckpt"))?;
    }
    Ok(FinetuneOutcome {
        checkpoint: ckpt,
        metrics,
    })
}
