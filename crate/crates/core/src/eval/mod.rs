//! Evaluation courses, per-episode metrics and multi-controller comparison.

mod compare;
mod metrics;
mod scenario;

use std::collections::VecDeque;

use crate::alip::Action;
use crate::env::{policy_input, BipedEnv, DoneReason, EnvConfig, TrajectoryRow};
use crate::error::Result;
use crate::nn::GaussianPolicy;

pub use compare::{
    compare_variants, write_episodes_csv, CompareOutcome, Manifest, ManifestEntry,
    COMPARISON_FILE, EPISODES_FILE, EPISODES_HEADER, HISTOGRAM_FILE, SCATTER_FILE,
};
pub use metrics::{
    instant_tracking_error, tracking_error, violation_error_scatter, weight_histogram, Scatter,
    TrackingError,
};
pub use scenario::{Scenario, EVAL_SPEED};

/// Who picks the actions.
#[derive(Debug, Clone, Copy)]
pub enum Controller<'a> {
    /// The model-based foot-placement controller.
    Expert,
    /// A trained policy, run with its mean action.
    Policy(&'a GaussianPolicy),
}

impl Controller<'_> {
    pub fn act(&self, env: &BipedEnv, obs: &[f64]) -> Result<Action> {
        match self {
            Controller::Expert => Ok(env.expert_action()),
            Controller::Policy(p) => {
                let mu = p.mean_action(&policy_input(obs))?;
                Ok(Action::from_slice(
                    &mu.iter().map(|&v| v as f64).collect::<Vec<_>>(),
                ))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    /// Length of the trailing window over which velocity is averaged before
    /// comparing with the command (s).
    pub tracking_window: f64,
    /// Start-up time excluded from the windowed error (s): windows must
    /// begin at or after it.
    pub settle_time: f64,
    pub record_trajectory: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            // One gait cycle (two steps), so the lateral sway cancels.
            tracking_window: 0.8,
            settle_time: 1.0,
            record_trajectory: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub success: bool,
    /// Forward displacement (m).
    pub distance: f64,
    pub level_reached: f64,
    /// Linear tracking error, percent of the command (m/s when
    /// `error_absolute`). After a fall the robot counts as standing still
    /// until the course's nominal duration.
    pub tracking_error: f64,
    pub error_absolute: bool,
    /// Mean |realized − commanded| yaw rate (rad/s).
    pub ang_error: f64,
    pub mean_abs_zdot: f64,
    pub mean_w: f64,
    pub fall_reason: Option<DoneReason>,
    pub ticks: u64,
}

/// Per-tick quantities kept for histograms and scatter plots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickSample {
    pub z_dot: f64,
    pub w: f64,
    /// Windowed instantaneous tracking error, once a full window exists.
    pub error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub seed: u64,
    pub metrics: EpisodeMetrics,
    pub samples: Vec<TickSample>,
    pub trajectory: Vec<TrajectoryRow>,
}

/// Runs one deterministic episode of `scenario`.
pub fn run_episode(
    controller: Controller<'_>,
    scenario: &Scenario,
    seed: u64,
    env_cfg: &EnvConfig,
    eval_cfg: &EvalConfig,
) -> Result<EpisodeResult> {
    let mut cfg = env_cfg.clone();
    cfg.episode_length = scenario.time_limit();
    let dt = cfg.control_dt;
    let window = ((eval_cfg.tracking_window / dt).round() as usize).max(1);
    let first_full = (eval_cfg.settle_time / dt).round() as usize + window;
    let mut env = BipedEnv::new(cfg)?;
    let cmd = scenario.command();
    let mut obs = env.reset(seed, scenario.terrain(seed)?, cmd);
    let start = env.state().com_world();
    let finish = scenario.finish_line();

    let mut positions: VecDeque<[f64; 3]> = VecDeque::with_capacity(window + 1);
    positions.push_back(start);
    let mut samples = Vec::new();
    let mut trajectory = Vec::new();
    let (mut zdot_sum, mut w_sum, mut ang_sum) = (0.0, 0.0, 0.0);
    let mut err_sum = 0.0;
    let mut err_n = 0usize;
    let mut absolute = false;
    let mut reason = None;
    let mut reached = false;
    let mut tick = 0usize;

    loop {
        tick += 1;
        let action = controller.act(&env, &obs)?;
        let t = env.step(&action)?;
        let com = env.state().com_world();
        positions.push_back(com);
        let oldest = if positions.len() > window {
            positions.pop_front()
        } else {
            None
        };
        let error = if let Some(old) = oldest.filter(|_| tick >= first_full) {
            let yaw = env.state().yaw;
            let (s, c) = yaw.sin_cos();
            let (dx, dy) = ((com[0] - old[0]) / (window as f64 * dt), (com[1] - old[1]) / (window as f64 * dt));
            let v = [c * dx + s * dy, -s * dx + c * dy];
            let e = instant_tracking_error(v, &cmd);
            absolute = e.absolute;
            err_sum += e.value;
            err_n += 1;
            Some(e.value)
        } else {
            None
        };
        zdot_sum += t.info.z_dot.abs();
        w_sum += t.info.mar_weight;
        ang_sum += (t.info.yaw_rate - cmd.yaw_rate).abs();
        samples.push(TickSample {
            z_dot: t.info.z_dot,
            w: t.info.mar_weight,
            error,
        });
        if eval_cfg.record_trajectory {
            trajectory.push(env.trajectory_row(t.reward, t.done));
        }
        if let Some(line) = finish {
            if com[0] - start[0] >= line && t.done.is_none_or(|d| !d.is_failure()) {
                reached = true;
                break;
            }
        }
        if let Some(d) = t.done {
            reason = Some(d);
            break;
        }
        obs = t.observation;
    }

    let ticks = env.state().tick;
    let end = env.state().com_world();
    let distance = end[0] - start[0];
    let fell = reason.is_some_and(|d| d.is_failure());
    let success = match finish {
        Some(_) => reached,
        None => !fell,
    };
    let mut tracking = if err_n > 0 {
        err_sum / err_n as f64
    } else {
        // No full window after settling: use the mean velocity since the start.
        let elapsed = ticks.max(1) as f64 * dt;
        let v = [(end[0] - start[0]) / elapsed, (end[1] - start[1]) / elapsed];
        let e = instant_tracking_error(v, &cmd);
        absolute = e.absolute;
        e.value
    };
    if fell {
        // A fallen robot stands still for the rest of the nominal duration,
        // so falling early can never improve the score.
        let stopped = instant_tracking_error([0.0, 0.0], &cmd).value;
        let nominal = (scenario.nominal_duration() / dt).round() as usize;
        if err_n > 0 {
            let pad = nominal.saturating_sub(tick.max(first_full - 1));
            tracking = (err_sum + pad as f64 * stopped) / (err_n + pad) as f64;
        } else if nominal > tick {
            tracking = (tracking * tick as f64 + stopped * (nominal - tick) as f64) / nominal as f64;
        }
    }
    let n = ticks.max(1) as f64;
    Ok(EpisodeResult {
        seed,
        metrics: EpisodeMetrics {
            success,
            distance,
            level_reached: scenario.level_reached(distance, success),
            tracking_error: tracking,
            error_absolute: absolute,
            ang_error: ang_sum / n,
            mean_abs_zdot: zdot_sum / n,
            mean_w: w_sum / n,
            fall_reason: if fell { reason } else { None },
            ticks,
        },
        samples,
        trajectory,
    })
}

/// One episode per seed, in seed order.
pub fn run_eval(
    controller: Controller<'_>,
    scenario: &Scenario,
    seeds: &[u64],
    env_cfg: &EnvConfig,
    eval_cfg: &EvalConfig,
) -> Result<Vec<EpisodeResult>> {
    seeds
        .iter()
        .map(|&s| run_episode(controller, scenario, s, env_cfg, eval_cfg))
        .collect()
}
