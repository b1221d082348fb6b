use std::fmt;
use std::str::FromStr;

use crate::alip::GaitCommand;
use crate::env::terrain::MAX_SLOPE_DEG;
use crate::env::{generate_terrain, TerrainField, TerrainKind};
use crate::error::{Error, Result};

/// Forward command used by every scenario except `flat:<speed>`.
pub const EVAL_SPEED: f64 = 0.6;
pub const RUN_UP: f64 = 1.5;
pub const SLOPE_LENGTH: f64 = 5.0;
pub const SEQUENCE_SEGMENT: f64 = 1.5;
pub const SEQUENCE_LEVELS: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
/// Duration of the fixed-time scenarios (s).
pub const FIXED_DURATION: f64 = 10.0;

/// Evaluation courses. Text form: `flat[:speed]`, `slope:<degrees>`,
/// `uneven_a:<level>`, `uneven_b:<level>`, `sequence`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scenario {
    Flat { speed: f64 },
    /// Flat run-up, then a 5 m incline.
    Slope { degrees: f64 },
    Uneven { kind: TerrainKind, level: f64 },
    /// Consecutive ramps of increasing steepness.
    Sequence,
}

impl Scenario {
    pub fn command(&self) -> GaitCommand {
        match self {
            Scenario::Flat { speed } => GaitCommand::forward(*speed),
            _ => GaitCommand::forward(EVAL_SPEED),
        }
    }

    pub fn terrain(&self, seed: u64) -> Result<TerrainField> {
        match *self {
            Scenario::Flat { .. } => Ok(TerrainField::flat()),
            Scenario::Slope { degrees } => {
                TerrainField::ramps(&[(RUN_UP, 0.0), (SLOPE_LENGTH, degrees / MAX_SLOPE_DEG)])
            }
            Scenario::Uneven { kind, level } => generate_terrain(kind, level, seed),
            Scenario::Sequence => {
                let mut segs = vec![(RUN_UP, 0.0)];
                segs.extend(SEQUENCE_LEVELS.iter().map(|&l| (SEQUENCE_SEGMENT, l)));
                TerrainField::ramps(&segs)
            }
        }
    }

    /// Forward distance that completes the course, if it has one.
    pub fn finish_line(&self) -> Option<f64> {
        match self {
            Scenario::Slope { .. } => Some(RUN_UP + SLOPE_LENGTH),
            Scenario::Sequence => Some(RUN_UP + SEQUENCE_SEGMENT * SEQUENCE_LEVELS.len() as f64),
            _ => None,
        }
    }

    /// Time limit: fixed for open courses, twice the nominal traverse time
    /// otherwise.
    pub fn time_limit(&self) -> f64 {
        match self.finish_line() {
            Some(d) => 2.0 * d / EVAL_SPEED,
            None => FIXED_DURATION,
        }
    }

    /// Time to complete the course at the commanded speed; the fixed
    /// duration for open courses.
    pub fn nominal_duration(&self) -> f64 {
        match self.finish_line() {
            Some(d) => d / EVAL_SPEED,
            None => FIXED_DURATION,
        }
    }

    /// Nominal difficulty on the `[0, 1]` terrain-level scale.
    pub fn level(&self) -> f64 {
        match *self {
            Scenario::Flat { .. } => 0.0,
            Scenario::Slope { degrees } => degrees / MAX_SLOPE_DEG,
            Scenario::Uneven { level, .. } => level,
            Scenario::Sequence => 1.0,
        }
    }

    /// Highest level fully traversed when the robot reached forward position `x`.
    pub fn level_reached(&self, x: f64, success: bool) -> f64 {
        match self {
            Scenario::Sequence => {
                let past = ((x - RUN_UP) / SEQUENCE_SEGMENT).floor();
                if past < 1.0 {
                    0.0
                } else {
                    SEQUENCE_LEVELS[(past as usize).min(SEQUENCE_LEVELS.len()) - 1]
                }
            }
            _ if success => self.level(),
            _ => 0.0,
        }
    }

    /// Courses used by `compare`.
    pub fn standard_set() -> Vec<Scenario> {
        vec![
            Scenario::Flat { speed: EVAL_SPEED },
            Scenario::Slope { degrees: 8.0 },
            Scenario::Slope { degrees: 10.0 },
            Scenario::Slope { degrees: 12.0 },
            Scenario::Slope { degrees: 14.0 },
            Scenario::Uneven {
                kind: TerrainKind::UnevenA,
                level: 0.5,
            },
            Scenario::Uneven {
                kind: TerrainKind::UnevenB,
                level: 0.5,
            },
            Scenario::Sequence,
        ]
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::Flat { speed } => write!(f, "flat:{speed}"),
            Scenario::Slope { degrees } => write!(f, "slope:{degrees}"),
            Scenario::Uneven { kind, level } => write!(f, "{kind}:{level}"),
            Scenario::Sequence => f.write_str("sequence"),
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidConfig(format!("scenario `{s}`: {msg}"));
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            let a = a.ok_or_else(|| bad("missing parameter".into()))?;
            a.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("`{a}` is not a number")))
        };
        match name {
            "flat" => {
                let speed = match arg {
                    None => EVAL_SPEED,
                    a => num(a)?,
                };
                if !(0.0..=2.0).contains(&speed) {
                    return Err(bad("speed must be in [0, 2] m/s".into()));
                }
                Ok(Scenario::Flat { speed })
            }
            "slope" => {
                let degrees = num(arg)?;
                if !(0.0..=MAX_SLOPE_DEG).contains(&degrees) {
                    return Err(bad(format!("angle must be in [0, {MAX_SLOPE_DEG}] degrees")));
                }
                Ok(Scenario::Slope { degrees })
            }
            "uneven_a" | "uneven_b" => {
                let level = num(arg)?;
                if !(0.0..=1.0).contains(&level) {
                    return Err(bad("level must be in [0, 1]".into()));
                }
                Ok(Scenario::Uneven {
                    kind: name.parse()?,
                    level,
                })
            }
            "sequence" if arg.is_none() => Ok(Scenario::Sequence),
            _ => Err(bad(
                "expected flat[:speed], slope:<deg>, uneven_a:<level>, uneven_b:<level> or sequence"
                    .into(),
            )),
        }
    }
}
