//! Per-episode dynamics perturbations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomizationConfig {
    pub mass_scale: (f64, f64),
    /// Scale on both height-regulator gains.
    pub gain_scale: (f64, f64),
    /// First-order action lag time constant in seconds.
    pub action_lag: (f64, f64),
    /// Mean time between lateral pushes in seconds. `0` disables pushes.
    pub push_interval: f64,
    /// Largest lateral velocity change a push may cause (m/s).
    pub push_max: f64,
}

impl Default for RandomizationConfig {
    fn default() -> Self {
        Self {
            mass_scale: (0.8, 1.2),
            gain_scale: (0.8, 1.2),
            action_lag: (0.0, 0.03),
            push_interval: 8.0,
            push_max: 0.3,
        }
    }
}

impl RandomizationConfig {
    /// Every range collapsed to the nominal value, no pushes.
    pub fn nominal() -> Self {
        Self {
            mass_scale: (1.0, 1.0),
            gain_scale: (1.0, 1.0),
            action_lag: (0.0, 0.0),
            push_interval: 0.0,
            push_max: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = |name: &str, (lo, hi): (f64, f64), min: f64| {
            if lo.is_finite() && hi.is_finite() && lo <= hi && lo >= min {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!(
                    "randomization range {name} = [{lo}, {hi}] is invalid"
                )))
            }
        };
        ordered("mass_scale", self.mass_scale, f64::MIN_POSITIVE)?;
        ordered("gain_scale", self.gain_scale, f64::MIN_POSITIVE)?;
        ordered("action_lag", self.action_lag, 0.0)?;
        if !(self.push_interval >= 0.0 && self.push_interval.is_finite()) {
            return Err(Error::InvalidConfig(
                "push_interval must be finite and >= 0".into(),
            ));
        }
        if !(self.push_max >= 0.0 && self.push_max <= 0.5) {
            return Err(Error::InvalidConfig("push_max must be in [0, 0.5]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Push {
    pub tick: u64,
    /// Lateral velocity change in the heading frame.
    pub dv: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsDraw {
    pub mass_scale: f64,
    pub gain_scale: f64,
    pub action_lag: f64,
    /// Sorted by tick.
    pub pushes: Vec<Push>,
}

impl DynamicsDraw {
    pub fn nominal() -> Self {
        Self {
            mass_scale: 1.0,
            gain_scale: 1.0,
            action_lag: 0.0,
            pushes: Vec::new(),
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    // Always consume one draw so the stream does not depend on range widths.
    let u: f64 = rng.random();
    lo + (hi - lo) * u
}

pub fn randomize_dynamics(
    seed: u64,
    cfg: &RandomizationConfig,
    episode_ticks: u64,
    control_dt: f64,
) -> DynamicsDraw {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mass_scale = uniform(&mut rng, cfg.mass_scale);
    let gain_scale = uniform(&mut rng, cfg.gain_scale);
    let action_lag = uniform(&mut rng, cfg.action_lag);
    let mut pushes = Vec::new();
    if cfg.push_interval > 0.0 && cfg.push_max > 0.0 {
        let rate = control_dt / cfg.push_interval;
        let mut t = 0.0f64;
        loop {
            // Exponential inter-arrival times, in ticks.
            let u: f64 = rng.random();
            t += -(1.0 - u).ln() / rate;
            let tick = t.ceil() as u64;
            if tick >= episode_ticks {
                break;
            }
            let dv = uniform(&mut rng, (-cfg.push_max, cfg.push_max));
            pushes.push(Push { tick, dv });
        }
    }
    DynamicsDraw {
        mass_scale,
        gain_scale,
        action_lag,
        pushes,
    }
}
