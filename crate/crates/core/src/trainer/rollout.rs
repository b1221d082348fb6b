//! Vectorized environments and on-policy rollout collection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sub_seed;
use crate::alip::{Action, GaitCommand};
use crate::env::{
    generate_terrain, policy_input, update_curriculum, BipedEnv, CurriculumState, DoneReason,
    EnvConfig, EpisodeStats, TerrainKind,
};
use crate::error::{Error, Result};
use crate::nn::{gaussian_log_prob, Checkpoint};

/// How each episode's terrain is chosen. Only the curriculum widens the
/// forward command range over time; the fixed schedules use the full range.
#[derive(Debug, Clone, PartialEq)]
pub enum TerrainSchedule {
    /// Random kind per episode; per-environment level adapted by the curriculum.
    Curriculum { kinds: Vec<TerrainKind> },
    /// Random kind and a level drawn uniformly from `[0, max_level]`.
    Uniform { kinds: Vec<TerrainKind>, max_level: f64 },
    Fixed { kind: TerrainKind, level: f64 },
}

impl TerrainSchedule {
    pub fn curriculum() -> Self {
        TerrainSchedule::Curriculum {
            kinds: TerrainKind::CURRICULUM.to_vec(),
        }
    }
}

/// Summary of one finished episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub env: usize,
    pub ticks: u64,
    pub episode_return: f64,
    pub mean_lin_tracking: f64,
    pub reason: DoneReason,
    pub kind: TerrainKind,
    pub level: f64,
    pub distance: f64,
}

pub(crate) struct SlotStep {
    pub reward: f64,
    pub lin: f64,
    pub ang: f64,
    pub done: bool,
    /// Observation after a time-limit truncation, for bootstrapping.
    pub truncated_obs: Option<Vec<f64>>,
}

pub(crate) struct EnvSlot {
    pub index: usize,
    pub env: BipedEnv,
    pub rng: ChaCha8Rng,
    pub obs: Vec<f64>,
    pub curriculum: CurriculumState,
    seed: u64,
    episode: u64,
    kind: TerrainKind,
    ep_return: f64,
    ep_lin: f64,
    ep_ticks: u64,
    pub records: Vec<EpisodeRecord>,
}

impl EnvSlot {
    fn start_episode(&mut self, schedule: &TerrainSchedule) -> Result<()> {
        let (kind, level) = match schedule {
            TerrainSchedule::Curriculum { kinds } => {
                (kinds[self.rng.random_range(0..kinds.len())], self.curriculum.terrain_level)
            }
            TerrainSchedule::Uniform { kinds, max_level } => {
                let kind = kinds[self.rng.random_range(0..kinds.len())];
                (kind, self.rng.random_range(0.0..=*max_level))
            }
            TerrainSchedule::Fixed { kind, level } => (*kind, *level),
        };
        let cmd = self.env.sample_command(&mut self.rng, self.curriculum.forward_max);
        let ep_seed = sub_seed(self.seed, &[self.index as u64, self.episode]);
        let terrain = generate_terrain(kind, level, ep_seed)?;
        self.obs = self.env.reset(ep_seed, terrain, cmd);
        self.kind = kind;
        self.episode += 1;
        self.ep_return = 0.0;
        self.ep_lin = 0.0;
        self.ep_ticks = 0;
        Ok(())
    }

    pub fn expert(&self) -> Action {
        self.env.expert_action()
    }

    pub fn step(&mut self, action: &Action, schedule: &TerrainSchedule) -> Result<SlotStep> {
        let t = self.env.step(action).map_err(|e| match e {
            Error::Env { message, .. } => Error::Env {
                index: self.index,
                message,
            },
            other => other,
        })?;
        self.ep_return += t.reward;
        self.ep_lin += t.terms.lin_vel;
        self.ep_ticks += 1;
        let mut out = SlotStep {
            reward: t.reward,
            lin: t.terms.lin_vel,
            ang: t.terms.ang_vel,
            done: t.done.is_some(),
            truncated_obs: None,
        };
        match t.done {
            None => self.obs = t.observation,
            Some(reason) => {
                if reason == DoneReason::Timeout {
                    out.truncated_obs = Some(t.observation);
                }
                self.finish_episode(reason, schedule);
                self.start_episode(schedule)?;
            }
        }
        Ok(out)
    }

    fn finish_episode(&mut self, reason: DoneReason, schedule: &TerrainSchedule) {
        let cfg = self.env.config();
        let com = self.env.state().com_world();
        let distance = com[0].hypot(com[1]);
        let cmd: GaitCommand = self.env.command();
        let elapsed = self.ep_ticks as f64 * cfg.control_dt;
        let commanded = cmd.v_x.hypot(cmd.v_y) * elapsed;
        let fell = reason.is_failure();
        let mean_lin = self.ep_lin / self.ep_ticks.max(1) as f64;
        let stats = EpisodeStats {
            fell,
            traversed: !fell && distance >= cfg.curriculum.distance_fraction * commanded,
            mean_lin_tracking: mean_lin,
        };
        let level = self.env.terrain().level();
        if matches!(schedule, TerrainSchedule::Curriculum { .. }) {
            self.curriculum =
                update_curriculum(self.curriculum, &stats, &cfg.curriculum, cfg.reward.lin_vel_weight);
        }
        self.records.push(EpisodeRecord {
            env: self.index,
            ticks: self.ep_ticks,
            episode_return: self.ep_return,
            mean_lin_tracking: mean_lin,
            reason,
            kind: self.kind,
            level,
            distance,
        });
    }
}

/// A fixed set of independent environments, each with its own random stream.
pub struct VecEnv {
    pub(crate) slots: Vec<EnvSlot>,
    pub(crate) schedule: TerrainSchedule,
    workers: usize,
}

impl VecEnv {
    pub fn new(
        cfg: &EnvConfig,
        num_envs: usize,
        schedule: TerrainSchedule,
        seed: u64,
        workers: usize,
    ) -> Result<Self> {
        if num_envs == 0 {
            return Err(Error::InvalidConfig("need at least one environment".into()));
        }
        if let TerrainSchedule::Curriculum { kinds } | TerrainSchedule::Uniform { kinds, .. } =
            &schedule
        {
            if kinds.is_empty() {
                return Err(Error::InvalidConfig("terrain schedule has no kinds".into()));
            }
        }
        let mut slots = Vec::with_capacity(num_envs);
        for index in 0..num_envs {
            let mut slot = EnvSlot {
                index,
                env: BipedEnv::new(cfg.clone())?,
                rng: ChaCha8Rng::seed_from_u64(sub_seed(seed, &[index as u64, u64::MAX])),
                obs: Vec::new(),
                // Fixed schedules sample the full command range from the start.
                curriculum: CurriculumState {
                    terrain_level: 0.0,
                    forward_max: match schedule {
                        TerrainSchedule::Curriculum { .. } => cfg.curriculum.speed_start,
                        _ => cfg.curriculum.speed_max,
                    },
                },
                seed,
                episode: 0,
                kind: TerrainKind::Flat,
                ep_return: 0.0,
                ep_lin: 0.0,
                ep_ticks: 0,
                records: Vec::new(),
            };
            slot.start_episode(&schedule)?;
            slots.push(slot);
        }
        Ok(Self {
            slots,
            schedule,
            workers: workers.max(1),
        })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn mean_terrain_level(&self) -> f64 {
        self.slots.iter().map(|s| s.curriculum.terrain_level).sum::<f64>() / self.len() as f64
    }

    pub fn mean_forward_max(&self) -> f64 {
        self.slots.iter().map(|s| s.curriculum.forward_max).sum::<f64>() / self.len() as f64
    }

    /// Runs `f` on every slot, fanning out over the worker threads. Results
    /// come back in slot order regardless of the worker count.
    pub(crate) fn for_each_slot<T, F>(&mut self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&mut EnvSlot, &TerrainSchedule) -> Result<T> + Sync,
    {
        let schedule = &self.schedule;
        if self.workers <= 1 || self.slots.len() <= 1 {
            return self.slots.iter_mut().map(|s| f(s, schedule)).collect();
        }
        let chunk = self.slots.len().div_ceil(self.workers);
        let f = &f;
        std::thread::scope(|scope| {
            let handles: Vec<_> = self
                .slots
                .chunks_mut(chunk)
                .map(|c| {
                    scope.spawn(move || {
                        c.iter_mut().map(|s| f(s, schedule)).collect::<Result<Vec<T>>>()
                    })
                })
                .collect();
            let mut out = Vec::new();
            for h in handles {
                out.extend(h.join().expect("rollout worker panicked")?);
            }
            Ok(out)
        })
    }
}

/// On-policy samples, stored environment-major (`index = env · horizon + t`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBatch {
    pub num_envs: usize,
    pub horizon: usize,
    /// Scaled network inputs, `len · OBS_DIM`.
    pub states: Vec<f32>,
    pub actions: Vec<f32>,
    /// Rewards with time-limit bootstraps folded in (what GAE consumes).
    pub rewards: Vec<f64>,
    /// Rewards as returned by the environment.
    pub env_rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub values: Vec<f64>,
    pub log_probs: Vec<f64>,
    /// Expert labels of the visited states, `len · 4`.
    pub expert: Vec<f32>,
    pub mar_weights: Vec<f32>,
    pub z_dot: Vec<f64>,
    /// Bootstrap value after the last step of each environment.
    pub last_values: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    pub lin_tracking: Vec<f64>,
    pub ang_tracking: Vec<f64>,
    pub episodes: Vec<EpisodeRecord>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Fills `advantages` and `returns` per environment segment.
    pub fn compute_advantages(&mut self, gamma: f64, lambda: f64) -> Result<()> {
        let h = self.horizon;
        self.advantages = Vec::with_capacity(self.len());
        self.returns = Vec::with_capacity(self.len());
        for e in 0..self.num_envs {
            let r = &self.rewards[e * h..(e + 1) * h];
            let d = &self.dones[e * h..(e + 1) * h];
            let mut v = self.values[e * h..(e + 1) * h].to_vec();
            v.push(self.last_values[e]);
            let (adv, ret) = super::compute_gae(r, &v, d, gamma, lambda)?;
            self.advantages.extend(adv);
            self.returns.extend(ret);
        }
        Ok(())
    }
}

struct Segment {
    states: Vec<f32>,
    actions: Vec<f32>,
    rewards: Vec<f64>,
    env_rewards: Vec<f64>,
    dones: Vec<bool>,
    values: Vec<f64>,
    log_probs: Vec<f64>,
    expert: Vec<f32>,
    mar_weights: Vec<f32>,
    z_dot: Vec<f64>,
    lin: Vec<f64>,
    ang: Vec<f64>,
    last_value: f64,
}

pub(crate) fn value_of(ckpt: &Checkpoint, input: &[f32], value_scale: f64) -> Result<f64> {
    Ok(ckpt.value.forward(input)?[0] as f64 * value_scale)
}

/// Runs the stochastic policy for `horizon` ticks in every environment.
///
/// Every visited state is labelled with the expert action and the assumption
/// weight of that (pre-step) state. Time-limit truncations are bootstrapped
/// by folding `γ·V(s')` into the final reward.
pub fn collect_rollouts(
    ckpt: &Checkpoint,
    envs: &mut VecEnv,
    horizon: usize,
    gamma: f64,
) -> Result<RolloutBatch> {
    let value_scale = 1.0 / (1.0 - gamma);
    let segments = envs.for_each_slot(|slot, schedule| {
        let dim = Action::DIM;
        let mut seg = Segment {
            states: Vec::with_capacity(horizon * crate::env::OBS_DIM),
            actions: Vec::with_capacity(horizon * dim),
            rewards: Vec::with_capacity(horizon),
            env_rewards: Vec::with_capacity(horizon),
            dones: Vec::with_capacity(horizon),
            values: Vec::with_capacity(horizon),
            log_probs: Vec::with_capacity(horizon),
            expert: Vec::with_capacity(horizon * dim),
            mar_weights: Vec::with_capacity(horizon),
            z_dot: Vec::with_capacity(horizon),
            lin: Vec::with_capacity(horizon),
            ang: Vec::with_capacity(horizon),
            last_value: 0.0,
        };
        for _ in 0..horizon {
            let input = policy_input(&slot.obs);
            let mu = ckpt.policy.mean.forward(&input)?;
            let action = ckpt.policy.sample_around(&mu, &mut slot.rng);
            let logp = gaussian_log_prob(&mu, &ckpt.policy.log_std, &action);
            let value = value_of(ckpt, &input, value_scale)?;
            let expert = slot.expert();
            let info_before = slot.env.info();
            let step = slot.step(&Action::from_slice(&to64(&action)), schedule)?;
            let mut reward = step.reward;
            if let Some(obs) = &step.truncated_obs {
                reward += gamma * value_of(ckpt, &policy_input(obs), value_scale)?;
            }
            seg.states.extend_from_slice(&input);
            seg.actions.extend_from_slice(&action);
            seg.rewards.push(reward);
            seg.env_rewards.push(step.reward);
            seg.dones.push(step.done);
            seg.values.push(value);
            seg.log_probs.push(logp);
            seg.expert.extend(expert.to_array().iter().map(|&v| v as f32));
            seg.mar_weights.push(info_before.mar_weight as f32);
            seg.z_dot.push(info_before.z_dot);
            seg.lin.push(step.lin);
            seg.ang.push(step.ang);
        }
        seg.last_value = value_of(ckpt, &policy_input(&slot.obs), value_scale)?;
        Ok(seg)
    })?;

    let mut batch = RolloutBatch {
        num_envs: envs.len(),
        horizon,
        ..RolloutBatch::default()
    };
    for seg in segments {
        batch.states.extend(seg.states);
        batch.actions.extend(seg.actions);
        batch.rewards.extend(seg.rewards);
        batch.env_rewards.extend(seg.env_rewards);
        batch.dones.extend(seg.dones);
        batch.values.extend(seg.values);
        batch.log_probs.extend(seg.log_probs);
        batch.expert.extend(seg.expert);
        batch.mar_weights.extend(seg.mar_weights);
        batch.z_dot.extend(seg.z_dot);
        batch.lin_tracking.extend(seg.lin);
        batch.ang_tracking.extend(seg.ang);
        batch.last_values.push(seg.last_value);
    }
    for slot in &mut envs.slots {
        batch.episodes.append(&mut slot.records);
    }
    Ok(batch)
}

pub(crate) fn to64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}
