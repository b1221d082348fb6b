//! Terrain-level and forward-velocity curricula, updated per finished episode.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurriculumConfig {
    pub level_step: f64,
    pub speed_step: f64,
    /// Initial upper bound of the forward command (m/s).
    pub speed_start: f64,
    /// Cap on the forward command (m/s).
    pub speed_max: f64,
    /// Fraction of the linear tracking weight the episode mean must exceed
    /// before the forward range widens.
    pub tracking_threshold: f64,
    /// Fraction of the commanded distance that counts as a traversal.
    pub distance_fraction: f64,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            level_step: 0.1,
            speed_step: 0.1,
            speed_start: 0.6,
            speed_max: 1.0,
            tracking_threshold: 0.8,
            distance_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurriculumState {
    pub terrain_level: f64,
    pub forward_max: f64,
}

/// Outcome of one finished episode as seen by the curriculum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStats {
    pub fell: bool,
    pub traversed: bool,
    /// Mean of the weighted linear-tracking reward term over the episode.
    pub mean_lin_tracking: f64,
}

pub fn update_curriculum(
    state: CurriculumState,
    stats: &EpisodeStats,
    cfg: &CurriculumConfig,
    lin_vel_weight: f64,
) -> CurriculumState {
    let mut level = state.terrain_level;
    if stats.fell {
        level -= cfg.level_step;
    } else if stats.traversed {
        level += cfg.level_step;
    }
    let mut forward_max = state.forward_max;
    if stats.mean_lin_tracking > cfg.tracking_threshold * lin_vel_weight {
        forward_max = (forward_max + cfg.speed_step).min(cfg.speed_max);
    }
    CurriculumState {
        // Rounded to suppress drift from repeated ±0.1.
        terrain_level: (level.clamp(0.0, 1.0) * 1e9).round() / 1e9,
        forward_max,
    }
}
