//! Deterministic (policy-mean) rollouts for measuring a trained policy.

use super::rollout::{to64, TerrainSchedule, VecEnv};
use crate::alip::Action;
use crate::env::{policy_input, DoneReason, EnvConfig};
use crate::error::Result;
use crate::nn::{Checkpoint, Mlp};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyProbe {
    /// Weighted linear-tracking reward per nominal episode tick. A fall
    /// forfeits the rest of its episode.
    pub lin_tracking: f64,
    /// Mean |μ − a^E| per action dimension.
    pub action_error: [f64; 4],
    /// Mean |μ − a^E| (averaged over dimensions) on ticks with
    /// |ż| ≤ √δ, i.e. where the expert's model holds.
    pub low_violation_error: f64,
    pub low_violation_fraction: f64,
    /// Mean ‖∂μ/∂s‖²_F over visited states, with `s` the scaled network input.
    pub input_sensitivity: f64,
    pub falls: usize,
    pub episodes: usize,
    /// Ticks actually simulated.
    pub ticks: usize,
}

/// Squared Frobenius norm of the input Jacobian at one point.
pub fn jacobian_sq_norm(net: &Mlp, input: &[f32]) -> Result<f64> {
    let cache = net.forward_batch(input, 1)?;
    let mut scratch = vec![0.0f32; net.num_params()];
    let mut d = vec![0.0f32; net.output_dim()];
    let mut total = 0.0;
    for k in 0..d.len() {
        d.iter_mut().for_each(|v| *v = 0.0);
        d[k] = 1.0;
        let row = net.backward(&cache, &d, &mut scratch)?;
        total += row.iter().map(|&g| (g as f64).powi(2)).sum::<f64>();
    }
    Ok(total)
}

/// Runs `episodes` full episodes in each of `num_envs` environments with
/// the policy mean.
pub fn probe_policy(
    ckpt: &Checkpoint,
    env_cfg: &EnvConfig,
    schedule: TerrainSchedule,
    num_envs: usize,
    episodes: usize,
    seed: u64,
) -> Result<PolicyProbe> {
    let threshold = env_cfg.mar.delta().sqrt();
    let mut envs = VecEnv::new(env_cfg, num_envs, schedule, seed, 1)?;
    let per_env = envs.for_each_slot(|slot, schedule| {
        let mut lin = 0.0;
        let mut err = [0.0f64; 4];
        let (mut low_err, mut low_n) = (0.0, 0usize);
        let mut sens = 0.0;
        let mut ticks = 0usize;
        let mut finished = 0;
        while finished < episodes {
            let input = policy_input(&slot.obs);
            let mu = to64(&ckpt.policy.mean.forward(&input)?);
            sens += jacobian_sq_norm(&ckpt.policy.mean, &input)?;
            let expert = slot.expert().to_array();
            let e: Vec<f64> = (0..4).map(|k| (mu[k] - expert[k]).abs()).collect();
            for k in 0..4 {
                err[k] += e[k];
            }
            if slot.env.info().z_dot.abs() <= threshold {
                low_err += e.iter().sum::<f64>() / 4.0;
                low_n += 1;
            }
            let step = slot.step(&Action::from_slice(&mu), schedule)?;
            lin += step.lin;
            ticks += 1;
            if step.done {
                finished += 1;
            }
        }
        let falls = slot
            .records
            .iter()
            .filter(|r| r.reason != DoneReason::Timeout)
            .count();
        Ok((lin, err, low_err, low_n, sens, falls, ticks))
    })?;
    let mut out = PolicyProbe {
        lin_tracking: 0.0,
        action_error: [0.0; 4],
        low_violation_error: 0.0,
        low_violation_fraction: 0.0,
        input_sensitivity: 0.0,
        falls: 0,
        episodes: num_envs * episodes,
        ticks: 0,
    };
    let mut low_n = 0usize;
    for (lin, err, le, ln, sens, falls, ticks) in per_env {
        out.lin_tracking += lin;
        for k in 0..4 {
            out.action_error[k] += err[k];
        }
        out.low_violation_error += le;
        low_n += ln;
        out.input_sensitivity += sens;
        out.falls += falls;
        out.ticks += ticks;
    }
    let n = out.ticks.max(1) as f64;
    out.lin_tracking /= (out.episodes as u64 * env_cfg.episode_ticks()) as f64;
    out.action_error = out.action_error.map(|v| v / n);
    out.input_sensitivity /= n;
    out.low_violation_error /= low_n.max(1) as f64;
    out.low_violation_fraction = low_n as f64 / n;
    Ok(out)
}
