//! Observation vector layout.
//!
//! | index  | entry                                                   |
//! |--------|---------------------------------------------------------|
//! | 0, 1   | CoM velocity `v_x`, `v_y` (heading frame)               |
//! | 2      | vertical CoM velocity `ż`                               |
//! | 3      | realized yaw rate of the current step                   |
//! | 4, 5   | `sin`, `cos` of the gait phase angle `2πφ`              |
//! | 6      | stance sign (`+1` left, `-1` right)                     |
//! | 7, 8   | CoM offset from the stance contact `x_c`, `y_c`         |
//! | 9      | height error `z - z̄` above the stance contact           |
//! | 10..13 | command `v_x`, `v_y`, yaw rate                          |
//! | 13..17 | previous action                                         |
//! | 17..33 | `(x_c, y_c, v_x, v_y)` for the previous 4 ticks, newest first |

use std::collections::VecDeque;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::alip::{Action, GaitCommand};

pub const HISTORY_TICKS: usize = 4;
pub const OBS_DIM: usize = 17 + 4 * HISTORY_TICKS;

/// Typical-magnitude normalization applied before the networks see an
/// observation, so every entry is roughly unit scale.
pub const OBS_SCALE: [f64; OBS_DIM] = [
    2.0, 2.0, 10.0, 2.0, // velocities, ż, yaw rate
    1.0, 1.0, 1.0, // phase, stance
    5.0, 5.0, 20.0, // x_c, y_c, height error
    2.0, 5.0, 5.0, // command
    4.0, 4.0, 10.0, 5.0, // previous action
    5.0, 5.0, 2.0, 2.0, //
    5.0, 5.0, 2.0, 2.0, //
    5.0, 5.0, 2.0, 2.0, //
    5.0, 5.0, 2.0, 2.0, // history
];

/// Scaled single-precision network input.
pub fn policy_input(obs: &[f64]) -> Vec<f32> {
    obs.iter()
        .zip(OBS_SCALE.iter())
        .map(|(o, s)| (o * s) as f32)
        .collect()
}

/// Standard deviations of the additive observation noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub velocity: f64,
    pub height_rate: f64,
    pub yaw_rate: f64,
    pub position: f64,
    pub height: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            velocity: 0.01,
            height_rate: 0.005,
            yaw_rate: 0.01,
            position: 0.002,
            height: 0.002,
        }
    }
}

impl NoiseConfig {
    pub fn none() -> Self {
        Self {
            velocity: 0.0,
            height_rate: 0.0,
            yaw_rate: 0.0,
            position: 0.0,
            height: 0.0,
        }
    }
}

/// Noise-free sensor quantities of one tick, already in the heading frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sensors {
    pub velocity: [f64; 2],
    pub z_dot: f64,
    pub yaw_rate: f64,
    pub phase: f64,
    pub stance_sign: f64,
    pub x_c: f64,
    pub y_c: f64,
    pub height_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct History {
    ticks: VecDeque<[f64; 4]>,
}

impl Default for History {
    fn default() -> Self {
        Self {
            ticks: std::iter::repeat([0.0; 4]).take(HISTORY_TICKS).collect(),
        }
    }
}

impl History {
    pub fn push(&mut self, s: &Sensors) {
        self.ticks.pop_back();
        self.ticks
            .push_front([s.x_c, s.y_c, s.velocity[0], s.velocity[1]]);
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64; 4]> {
        self.ticks.iter()
    }
}

pub fn build_observation<R: Rng>(
    s: &Sensors,
    cmd: &GaitCommand,
    prev_action: &Action,
    history: &History,
    noise: &NoiseConfig,
    rng: &mut R,
) -> Vec<f64> {
    let mut n = |scale: f64| {
        let xi: f64 = rng.sample(StandardNormal);
        scale * xi
    };
    let angle = 2.0 * PI * s.phase;
    let mut obs = Vec::with_capacity(OBS_DIM);
    obs.push(s.velocity[0] + n(noise.velocity));
    obs.push(s.velocity[1] + n(noise.velocity));
    obs.push(s.z_dot + n(noise.height_rate));
    obs.push(s.yaw_rate + n(noise.yaw_rate));
    obs.push(angle.sin());
    obs.push(angle.cos());
    obs.push(s.stance_sign);
    obs.push(s.x_c + n(noise.position));
    obs.push(s.y_c + n(noise.position));
    obs.push(s.height_error + n(noise.height));
    obs.extend_from_slice(&cmd.to_array());
    obs.extend_from_slice(&prev_action.to_array());
    for h in history.iter() {
        obs.push(h[0] + n(noise.position));
        obs.push(h[1] + n(noise.position));
        obs.push(h[2] + n(noise.velocity));
        obs.push(h[3] + n(noise.velocity));
    }
    debug_assert_eq!(obs.len(), OBS_DIM);
    obs
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rest_observation_layout() {
        let s = Sensors {
            stance_sign: 1.0,
            ..Sensors::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let obs = build_observation(
            &s,
            &GaitCommand::default(),
            &Action::default(),
            &History::default(),
            &NoiseConfig::none(),
            &mut rng,
        );
        assert_eq!(obs.len(), OBS_DIM);
        for (i, v) in obs.iter().enumerate() {
            match i {
                5 | 6 => assert_eq!(*v, 1.0),
                _ => assert_eq!(*v, 0.0, "index {i}"),
            }
        }
    }

    #[test]
    fn zero_noise_is_deterministic() {
        let s = Sensors {
            velocity: [0.3, -0.1],
            z_dot: 0.02,
            phase: 0.25,
            stance_sign: -1.0,
            x_c: 0.05,
            y_c: 0.1,
            ..Sensors::default()
        };
        let mut h = History::default();
        h.push(&s);
        let mut r1 = ChaCha8Rng::seed_from_u64(1);
        let mut r2 = ChaCha8Rng::seed_from_u64(2);
        let cmd = GaitCommand::forward(0.4);
        let a = build_observation(&s, &cmd, &Action::default(), &h, &NoiseConfig::none(), &mut r1);
        let b = build_observation(&s, &cmd, &Action::default(), &h, &NoiseConfig::none(), &mut r2);
        assert_eq!(a, b);
        assert_eq!(&a[17..21], &[0.05, 0.1, 0.3, -0.1]);
        assert!((a[4] - 1.0).abs() < 1e-12);

        let c = build_observation(&s, &cmd, &Action::default(), &h, &NoiseConfig::default(), &mut r1);
        assert_ne!(a, c);
        // Structural entries are never perturbed.
        assert_eq!(&a[4..7], &c[4..7]);
        assert_eq!(&a[10..17], &c[10..17]);
    }

    #[test]
    fn history_is_newest_first_and_bounded() {
        let mut h = History::default();
        for i in 0..6 {
            h.push(&Sensors {
                x_c: i as f64,
                ..Sensors::default()
            });
        }
        let xs: Vec<f64> = h.iter().map(|e| e[0]).collect();
        assert_eq!(xs, vec![5.0, 4.0, 3.0, 2.0]);
    }
}
