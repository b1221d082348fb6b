//! Velocity-tracking reward with effort and vertical-motion penalties.
//!
//! Reduced-model analogs: the torque penalty uses the vertical leg force
//! `u_z`, and base motion uses the vertical CoM velocity `ż`.

use crate::alip::GaitCommand;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig {
    pub lin_vel_weight: f64,
    pub ang_vel_weight: f64,
    pub effort_weight: f64,
    pub base_motion_weight: f64,
    /// Temperature of the linear tracking kernel (m²/s²).
    pub delta_xy: f64,
    /// Temperature of the yaw-rate tracking kernel (rad²/s²).
    pub delta_yaw: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            lin_vel_weight: 1.2,
            ang_vel_weight: 1.1,
            effort_weight: -4e-6,
            base_motion_weight: -0.6,
            delta_xy: 0.25,
            delta_yaw: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RewardTerms {
    pub lin_vel: f64,
    pub ang_vel: f64,
    pub effort: f64,
    pub base_motion: f64,
}

impl RewardTerms {
    pub fn total(&self) -> f64 {
        self.lin_vel + self.ang_vel + self.effort + self.base_motion
    }
}

/// Weighted reward terms for one control tick. `velocity` is the realized
/// horizontal CoM velocity in the heading frame, `yaw_rate` the realized
/// per-step yaw rate.
pub fn compute_reward(
    velocity: [f64; 2],
    yaw_rate: f64,
    cmd: &GaitCommand,
    u_z: f64,
    z_dot: f64,
    cfg: &RewardConfig,
) -> RewardTerms {
    let ex = velocity[0] - cmd.v_x;
    let ey = velocity[1] - cmd.v_y;
    let eyaw = yaw_rate - cmd.yaw_rate;
    RewardTerms {
        lin_vel: cfg.lin_vel_weight * (-(ex * ex + ey * ey) / cfg.delta_xy).exp(),
        ang_vel: cfg.ang_vel_weight * (-(eyaw * eyaw) / cfg.delta_yaw).exp(),
        effort: cfg.effort_weight * u_z * u_z,
        base_motion: cfg.base_motion_weight * z_dot * z_dot,
    }
}
