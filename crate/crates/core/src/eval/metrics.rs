use crate::alip::GaitCommand;
use crate::error::{Error, Result};

/// Commands slower than this count as zero; the error is then absolute.
const MIN_COMMAND_NORM: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingError {
    /// Percent of the command norm, or m/s when `absolute`.
    pub value: f64,
    /// Set when the command is zero and a relative error is undefined.
    pub absolute: bool,
}

/// Instantaneous linear tracking error of one velocity sample.
pub fn instant_tracking_error(v: [f64; 2], cmd: &GaitCommand) -> TrackingError {
    let gap = (v[0] - cmd.v_x).hypot(v[1] - cmd.v_y);
    let norm = cmd.v_x.hypot(cmd.v_y);
    if norm < MIN_COMMAND_NORM {
        TrackingError {
            value: gap,
            absolute: true,
        }
    } else {
        TrackingError {
            value: 100.0 * gap / norm,
            absolute: false,
        }
    }
}

/// `100 · mean‖v − v_cmd‖ / ‖v_cmd‖` over a velocity trace.
pub fn tracking_error(velocities: &[[f64; 2]], cmd: &GaitCommand) -> Result<TrackingError> {
    if velocities.is_empty() {
        return Err(Error::Eval("tracking error of an empty trace".into()));
    }
    let mut sum = 0.0;
    let mut absolute = false;
    for v in velocities {
        let e = instant_tracking_error(*v, cmd);
        sum += e.value;
        absolute = e.absolute;
    }
    Ok(TrackingError {
        value: sum / velocities.len() as f64,
        absolute,
    })
}

/// Fractions of `weights` in `bins` equal-width regions partitioning
/// `[0, w0]`; the last region is closed.
pub fn weight_histogram(weights: &[f64], w0: f64, bins: usize) -> Result<Vec<f64>> {
    if weights.is_empty() {
        return Err(Error::Eval("weight histogram of no samples".into()));
    }
    if !(w0 > 0.0) || bins == 0 {
        return Err(Error::Eval(format!("need w0 > 0 and at least one bin (w0 {w0}, bins {bins})")));
    }
    let mut counts = vec![0usize; bins];
    for &w in weights {
        if !(0.0..=w0).contains(&w) {
            return Err(Error::Eval(format!("weight {w} outside [0, {w0}]")));
        }
        let b = ((w / w0) * bins as f64).floor() as usize;
        counts[b.min(bins - 1)] += 1;
    }
    let n = weights.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scatter {
    /// `(|ż|, tracking error)` pairs.
    pub points: Vec<(f64, f64)>,
    /// Least-squares slope of error against `|ż|` (0 when undefined).
    pub slope: f64,
}

pub fn violation_error_scatter(points: Vec<(f64, f64)>) -> Scatter {
    let n = points.len() as f64;
    if points.len() < 2 {
        return Scatter { points, slope: 0.0 };
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(x, y) in &points {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    Scatter { points, slope }
}
