//! Procedural heightfields for the terrain curriculum.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;

pub const MAX_SLOPE_DEG: f64 = 15.0;
pub const MAX_BUMP_AMPLITUDE: f64 = 0.1;
pub const MAX_STEP_HEIGHT: f64 = 0.1;
/// Where the `step` terrain rises.
pub const STEP_EDGE_X: f64 = 0.3;

const WAVELENGTH_A: f64 = 1.2;
const WAVELENGTH_B: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TerrainKind {
    Flat,
    Uphill,
    Downhill,
    UnevenA,
    UnevenB,
    /// Single rise of `level * 0.1 m` at `x = 0.3 m`. Evaluation only.
    Step,
}

impl TerrainKind {
    /// The five kinds used by the training curriculum.
    pub const CURRICULUM: [TerrainKind; 5] = [
        TerrainKind::Flat,
        TerrainKind::Uphill,
        TerrainKind::Downhill,
        TerrainKind::UnevenA,
        TerrainKind::UnevenB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TerrainKind::Flat => "flat",
            TerrainKind::Uphill => "uphill",
            TerrainKind::Downhill => "downhill",
            TerrainKind::UnevenA => "uneven_a",
            TerrainKind::UnevenB => "uneven_b",
            TerrainKind::Step => "step",
        }
    }
}

impl fmt::Display for TerrainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TerrainKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flat" => Ok(TerrainKind::Flat),
            "uphill" => Ok(TerrainKind::Uphill),
            "downhill" => Ok(TerrainKind::Downhill),
            "uneven_a" => Ok(TerrainKind::UnevenA),
            "uneven_b" => Ok(TerrainKind::UnevenB),
            "step" => Ok(TerrainKind::Step),
            other => Err(Error::UnknownTerrain(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Flat,
    /// Height `gradient * x`.
    Ramp { gradient: f64 },
    Bumps {
        amplitude: f64,
        wavenumber: f64,
        phase_x: f64,
        phase_y: f64,
    },
    Step { height: f64 },
    /// Consecutive uphill ramps along `x`, one gradient per segment, joined
    /// continuously. Flat before `x = 0` and after the last segment.
    /// Consecutive `(length, gradient)` pieces from `x = 0`, flat beyond.
    Ramps { segments: Vec<(f64, f64)> },
}

/// Deterministic heightfield `h(x, y)` given `(kind, level, seed)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TerrainField {
    kind: TerrainKind,
    level: f64,
    seed: u64,
    shape: Shape,
}

pub fn slope_gradient(level: f64) -> f64 {
    (level * MAX_SLOPE_DEG).to_radians().tan()
}

pub fn generate_terrain(kind: TerrainKind, level: f64, seed: u64) -> Result<TerrainField, Error> {
    if !(0.0..=1.0).contains(&level) {
        return Err(Error::InvalidTerrainLevel(level));
    }
    let bumps = |wavelength: f64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Shape::Bumps {
            amplitude: level * MAX_BUMP_AMPLITUDE,
            wavenumber: 2.0 * PI / wavelength,
            phase_x: rng.random_range(0.0..2.0 * PI),
            phase_y: rng.random_range(0.0..2.0 * PI),
        }
    };
    let shape = match kind {
        TerrainKind::Flat => Shape::Flat,
        TerrainKind::Uphill => Shape::Ramp {
            gradient: slope_gradient(level),
        },
        TerrainKind::Downhill => Shape::Ramp {
            gradient: -slope_gradient(level),
        },
        TerrainKind::UnevenA => bumps(WAVELENGTH_A),
        TerrainKind::UnevenB => bumps(WAVELENGTH_B),
        TerrainKind::Step => Shape::Step {
            height: level * MAX_STEP_HEIGHT,
        },
    };
    Ok(TerrainField {
        kind,
        level,
        seed,
        shape,
    })
}

impl TerrainField {
    pub fn flat() -> Self {
        Self {
            kind: TerrainKind::Flat,
            level: 0.0,
            seed: 0,
            shape: Shape::Flat,
        }
    }

    /// Uphill ramps of increasing difficulty: segment `i` spans
    /// `[i * segment_length, (i + 1) * segment_length)` with slope `levels[i] * 15°`.
    pub fn ramp_sequence(levels: &[f64], segment_length: f64) -> Result<Self, Error> {
        let segments: Vec<(f64, f64)> = levels.iter().map(|&l| (segment_length, l)).collect();
        Self::ramps(&segments)
    }

    /// Piecewise uphill profile from `(length, level)` pieces starting at
    /// `x = 0`; level 0 is flat. Height stays constant past the last piece.
    pub fn ramps(segments: &[(f64, f64)]) -> Result<Self, Error> {
        for &(len, l) in segments {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::InvalidTerrainLevel(l));
            }
            if !(len > 0.0 && len.is_finite()) {
                return Err(Error::InvalidConfig(format!("ramp length must be > 0, got {len}")));
            }
        }
        Ok(Self {
            kind: TerrainKind::Uphill,
            level: segments.iter().map(|s| s.1).fold(0.0, f64::max),
            seed: 0,
            shape: Shape::Ramps {
                segments: segments
                    .iter()
                    .map(|&(len, l)| (len, slope_gradient(l)))
                    .collect(),
            },
        })
    }

    pub fn kind(&self) -> TerrainKind {
        self.kind
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn height(&self, x: f64, y: f64) -> f64 {
        match &self.shape {
            Shape::Flat => 0.0,
            Shape::Ramp { gradient } => gradient * x,
            Shape::Bumps {
                amplitude,
                wavenumber,
                phase_x,
                phase_y,
            } => {
                0.5 * amplitude
                    * ((wavenumber * x + phase_x).sin() + (wavenumber * y + phase_y).sin()
                        - phase_x.sin()
                        - phase_y.sin())
            }
            Shape::Step { height } => {
                if x >= STEP_EDGE_X {
                    *height
                } else {
                    0.0
                }
            }
            Shape::Ramps { segments } => {
                let mut h = 0.0;
                let mut start = 0.0;
                for &(len, g) in segments {
                    if x <= start {
                        break;
                    }
                    h += g * (x - start).min(len);
                    start += len;
                }
                h
            }
        }
    }
}
