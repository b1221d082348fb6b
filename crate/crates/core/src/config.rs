//! INI-style run configuration.
//!
//! ```text
//! # comments start with '#'
//! [mar]
//! w0 = 5
//! delta = 0.0159
//!
//! ppo.lr = 3e-4      # dotted keys work outside sections too
//! ```
//!
//! Every key is typed and range-checked as it is read; cross-field checks
//! run once the whole file is in. [`RunConfig::to_ini`] writes the full
//! effective configuration back in the same format.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::alip::{AlipParams, MarConfig};
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::eval::{EvalConfig, Scenario};
use crate::trainer::{TrainConfig, Variant};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub scenarios: Vec<Scenario>,
    pub seeds: u64,
    pub eval: EvalConfig,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            scenarios: Scenario::standard_set(),
            seeds: 5,
            eval: EvalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub env: EnvConfig,
    /// Holds the seed, the worker count and its own copy of the MAR
    /// constants, which is kept equal to `env.mar`.
    pub train: TrainConfig,
    pub eval: EvalSettings,
    pub out: Option<PathBuf>,
}

type Parsed<T> = std::result::Result<T, String>;

trait Show {
    fn show(&self) -> String;
}

macro_rules! show_display {
    ($($t:ty),*) => {$(
        impl Show for $t {
            fn show(&self) -> String {
                self.to_string()
            }
        }
    )*};
}
show_display!(f64, f32, usize, u64, Variant);

impl Show for (f64, f64) {
    fn show(&self) -> String {
        format!("{}, {}", self.0, self.1)
    }
}

impl Show for Vec<usize> {
    fn show(&self) -> String {
        if self.is_empty() {
            return "none".into();
        }
        self.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
    }
}

impl Show for Vec<Scenario> {
    fn show(&self) -> String {
        self.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
    }
}

impl Show for Option<PathBuf> {
    fn show(&self) -> String {
        self.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
    }
}

fn num<T: FromStr>(v: &str) -> Parsed<T> {
    v.parse()
        .map_err(|_| format!("expected a {}, got `{v}`", std::any::type_name::<T>()))
}

fn real(v: &str) -> Parsed<f64> {
    let x: f64 = num(v)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("must be finite, got {v}"))
    }
}

fn positive(v: &str) -> Parsed<f64> {
    let x = real(v)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(format!("must be > 0, got {v}"))
    }
}

fn non_negative(v: &str) -> Parsed<f64> {
    let x = real(v)?;
    if x >= 0.0 {
        Ok(x)
    } else {
        Err(format!("must be >= 0, got {v}"))
    }
}

fn unit(v: &str) -> Parsed<f64> {
    let x = real(v)?;
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(format!("must be in [0, 1], got {v}"))
    }
}

fn open_unit(v: &str) -> Parsed<f64> {
    let x = real(v)?;
    if x > 0.0 && x < 1.0 {
        Ok(x)
    } else {
        Err(format!("must be in (0, 1), got {v}"))
    }
}

fn count(v: &str) -> Parsed<usize> {
    match num::<usize>(v)? {
        0 => Err("must be >= 1".into()),
        n => Ok(n),
    }
}

fn non_zero_u64(v: &str) -> Parsed<u64> {
    match num::<u64>(v)? {
        0 => Err("must be >= 1".into()),
        n => Ok(n),
    }
}

fn positive_f32(v: &str) -> Parsed<f32> {
    Ok(positive(v)? as f32)
}

fn range(v: &str) -> Parsed<(f64, f64)> {
    let (lo, hi) = v
        .split_once(',')
        .ok_or_else(|| format!("expected `low, high`, got `{v}`"))?;
    let (lo, hi) = (non_negative(lo.trim())?, non_negative(hi.trim())?);
    if lo <= hi {
        Ok((lo, hi))
    } else {
        Err(format!("low {lo} exceeds high {hi}"))
    }
}

/// Comma-separated layer widths; `none` for a linear map.
fn sizes(v: &str) -> Parsed<Vec<usize>> {
    if v == "none" {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| count(s.trim())).collect()
}

fn scenarios(v: &str) -> Parsed<Vec<Scenario>> {
    let list: Vec<Scenario> = v
        .split(',')
        .map(|s| s.trim().parse().map_err(|e: Error| e.to_string()))
        .collect::<Parsed<_>>()?;
    if list.is_empty() {
        Err("needs at least one scenario".into())
    } else {
        Ok(list)
    }
}

fn path(v: &str) -> Parsed<Option<PathBuf>> {
    Ok(Some(PathBuf::from(v)))
}

fn variant(v: &str) -> Parsed<Variant> {
    v.parse().map_err(|e: Error| e.to_string())
}

struct Field {
    key: &'static str,
    get: fn(&RunConfig) -> String,
    set: fn(&mut RunConfig, &str) -> Parsed<()>,
}

macro_rules! field {
    ($key:literal, $c:ident => $place:expr, $parse:expr) => {
        Field {
            key: $key,
            get: |$c: &RunConfig| $place.show(),
            set: |$c: &mut RunConfig, v: &str| {
                $place = $parse(v)?;
                Ok(())
            },
        }
    };
}

fn set_alip(c: &mut RunConfig, which: usize, v: &str) -> Parsed<()> {
    let p = &c.env.alip;
    let mut vals = [p.mass(), p.gravity(), p.nominal_height(), p.step_duration(), p.step_width()];
    vals[which] = positive(v)?;
    c.env.alip = AlipParams::new(vals[0], vals[1], vals[2], vals[3], vals[4])
        .map_err(|e| e.to_string())?;
    Ok(())
}

fn set_mar(c: &mut RunConfig, w0: Option<f64>, delta: Option<f64>) -> Parsed<()> {
    let m = MarConfig::new(
        w0.unwrap_or(c.env.mar.w0()),
        delta.unwrap_or(c.env.mar.delta()),
    )
    .map_err(|e| e.to_string())?;
    c.env.mar = m;
    c.train.mar = m;
    Ok(())
}

fn fields() -> Vec<Field> {
    vec![
        field!("run.seed", c => c.train.seed, num::<u64>),
        field!("run.workers", c => c.train.workers, count),
        field!("run.out", c => c.out, path),
        Field {
            key: "alip.mass",
            get: |c| c.env.alip.mass().show(),
            set: |c, v| set_alip(c, 0, v),
        },
        Field {
            key: "alip.gravity",
            get: |c| c.env.alip.gravity().show(),
            set: |c, v| set_alip(c, 1, v),
        },
        Field {
            key: "alip.nominal_height",
            get: |c| c.env.alip.nominal_height().show(),
            set: |c, v| set_alip(c, 2, v),
        },
        Field {
            key: "alip.step_duration",
            get: |c| c.env.alip.step_duration().show(),
            set: |c, v| set_alip(c, 3, v),
        },
        Field {
            key: "alip.step_width",
            get: |c| c.env.alip.step_width().show(),
            set: |c, v| set_alip(c, 4, v),
        },
        Field {
            key: "mar.w0",
            get: |c| c.env.mar.w0().show(),
            set: |c, v| set_mar(c, Some(non_negative(v)?), None),
        },
        Field {
            key: "mar.delta",
            get: |c| c.env.mar.delta().show(),
            set: |c, v| set_mar(c, None, Some(positive(v)?)),
        },
        field!("env.control_dt", c => c.env.control_dt, positive),
        field!("env.physics_dt", c => c.env.physics_dt, positive),
        field!("env.episode_length", c => c.env.episode_length, positive),
        field!("env.height_kp", c => c.env.height_kp, positive),
        field!("env.height_kd", c => c.env.height_kd, non_negative),
        field!("env.max_leg_length", c => c.env.max_leg_length, positive),
        field!("env.min_leg_length", c => c.env.min_leg_length, non_negative),
        field!("env.fall_offset", c => c.env.fall_offset, positive),
        field!("env.collapse_height", c => c.env.collapse_height, positive),
        field!("limits.step_x", c => c.env.limits.step_x, positive),
        field!("limits.step_y", c => c.env.limits.step_y, positive),
        field!("limits.height_offset", c => c.env.limits.height_offset, non_negative),
        field!("limits.yaw_step", c => c.env.limits.yaw_step, non_negative),
        field!("commands.forward_min", c => c.env.commands.forward_min, non_negative),
        field!("commands.lateral", c => c.env.commands.lateral, non_negative),
        field!("commands.yaw_rate", c => c.env.commands.yaw_rate, non_negative),
        field!("randomization.mass_scale", c => c.env.randomization.mass_scale, range),
        field!("randomization.gain_scale", c => c.env.randomization.gain_scale, range),
        field!("randomization.action_lag", c => c.env.randomization.action_lag, range),
        field!("randomization.push_interval", c => c.env.randomization.push_interval, non_negative),
        field!("randomization.push_max", c => c.env.randomization.push_max, non_negative),
        field!("noise.velocity", c => c.env.noise.velocity, non_negative),
        field!("noise.height_rate", c => c.env.noise.height_rate, non_negative),
        field!("noise.yaw_rate", c => c.env.noise.yaw_rate, non_negative),
        field!("noise.position", c => c.env.noise.position, non_negative),
        field!("noise.height", c => c.env.noise.height, non_negative),
        field!("reward.lin_vel_weight", c => c.env.reward.lin_vel_weight, real),
        field!("reward.ang_vel_weight", c => c.env.reward.ang_vel_weight, real),
        field!("reward.effort_weight", c => c.env.reward.effort_weight, real),
        field!("reward.base_motion_weight", c => c.env.reward.base_motion_weight, real),
        field!("reward.delta_xy", c => c.env.reward.delta_xy, positive),
        field!("reward.delta_yaw", c => c.env.reward.delta_yaw, positive),
        field!("curriculum.level_step", c => c.env.curriculum.level_step, unit),
        field!("curriculum.speed_step", c => c.env.curriculum.speed_step, non_negative),
        field!("curriculum.speed_start", c => c.env.curriculum.speed_start, non_negative),
        field!("curriculum.speed_max", c => c.env.curriculum.speed_max, non_negative),
        field!("curriculum.tracking_threshold", c => c.env.curriculum.tracking_threshold, unit),
        field!("curriculum.distance_fraction", c => c.env.curriculum.distance_fraction, unit),
        field!("train.variant", c => c.train.variant, variant),
        field!("train.num_envs", c => c.train.num_envs, count),
        field!("train.horizon", c => c.train.horizon, count),
        field!("train.iterations", c => c.train.iterations, num::<usize>),
        field!("train.hidden", c => c.train.hidden, sizes),
        field!("train.init_std", c => c.train.init_std, positive),
        field!("ppo.clip", c => c.train.ppo.clip, open_unit),
        field!("ppo.gamma", c => c.train.ppo.gamma, open_unit),
        field!("ppo.lambda", c => c.train.ppo.lambda, unit),
        field!("ppo.epochs", c => c.train.ppo.epochs, count),
        field!("ppo.minibatches", c => c.train.ppo.minibatches, count),
        field!("ppo.value_coef", c => c.train.ppo.value_coef, non_negative),
        field!("ppo.max_grad_norm", c => c.train.ppo.max_grad_norm, positive),
        field!("ppo.lr", c => c.train.ppo.lr, positive),
        field!("ppo.lipschitz_alpha", c => c.train.ppo.lipschitz_alpha, non_negative),
        field!("ppo.probe_scale", c => c.train.ppo.probe_scale, positive_f32),
        field!("dagger.iterations", c => c.train.dagger.iterations, num::<usize>),
        field!("dagger.rollout_ticks", c => c.train.dagger.rollout_ticks, count),
        field!("dagger.buffer_cap", c => c.train.dagger.buffer_cap, count),
        field!("dagger.passes", c => c.train.dagger.passes, count),
        field!("dagger.minibatch", c => c.train.dagger.minibatch, count),
        field!("dagger.lr", c => c.train.dagger.lr, positive),
        field!("dagger.beta_decay", c => c.train.dagger.beta_decay, unit),
        field!("dagger.max_level", c => c.train.dagger.max_level, unit),
        field!("eval.scenarios", c => c.eval.scenarios, scenarios),
        field!("eval.seeds", c => c.eval.seeds, non_zero_u64),
        field!("eval.tracking_window", c => c.eval.eval.tracking_window, positive),
        field!("eval.settle_time", c => c.eval.eval.settle_time, non_negative),
    ]
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let table = fields();
        let mut cfg = RunConfig::default();
        let mut section: Option<String> = None;
        let mut seen: Vec<(&'static str, usize)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[') {
                let name = name.strip_suffix(']').map(str::trim).ok_or_else(|| Error::Config {
                    line,
                    key: content.into(),
                    message: "unterminated section header".into(),
                })?;
                if !table.iter().any(|f| f.key.split('.').next() == Some(name)) {
                    return Err(Error::Config {
                        line,
                        key: name.into(),
                        message: "unknown section".into(),
                    });
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                key: content.into(),
                message: "expected `key = value`".into(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let full = match &section {
                Some(s) => format!("{s}.{key}"),
                None => key.to_string(),
            };
            let err = |message: String| Error::Config {
                line,
                key: full.clone(),
                message,
            };
            let field = table
                .iter()
                .find(|f| f.key == full)
                .ok_or_else(|| err("unknown key".into()))?;
            if let Some((_, first)) = seen.iter().find(|(k, _)| *k == field.key) {
                return Err(err(format!("already set on line {first}")));
            }
            if value.is_empty() {
                return Err(err("missing value".into()));
            }
            (field.set)(&mut cfg, value).map_err(err)?;
            seen.push((field.key, line));
        }
        cfg.validate().map_err(|e| match seen.last() {
            // Cross-field failures are pinned on the last assignment.
            Some(&(key, line)) => Error::Config {
                line,
                key: key.into(),
                message: e.to_string(),
            },
            None => e,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.train.validate()?;
        let c = &self.env.curriculum;
        if c.speed_start > c.speed_max {
            return Err(Error::InvalidConfig(
                "curriculum speed_start exceeds speed_max".into(),
            ));
        }
        if self.env.commands.forward_min > c.speed_start {
            return Err(Error::InvalidConfig(
                "commands forward_min exceeds curriculum speed_start".into(),
            ));
        }
        Ok(())
    }

    /// Full effective configuration, one section per key prefix. Parsing
    /// the output yields an equal config.
    pub fn to_ini(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for f in fields() {
            let (section, key) = f.key.split_once('.').expect("dotted key");
            let value = (f.get)(self);
            if value.is_empty() {
                continue;
            }
            if section != current {
                if !out.is_empty() {
                    out.push('\n');
                }
                out.push_str(&format!("[{section}]\n"));
                current = section;
            }
            out.push_str(&format!("{key} = {value}\n"));
        }
        out
    }

    /// All recognized keys, in the order [`RunConfig::to_ini`] writes them.
    pub fn keys() -> Vec<&'static str> {
        fields().iter().map(|f| f.key).collect()
    }
}
