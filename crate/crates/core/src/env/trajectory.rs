//! Per-episode trajectory dump.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::DoneReason;
use crate::error::Result;

pub const TRAJECTORY_HEADER: &str =
    "tick,t,x_w,y_w,z,zdot,vx,vy,psi,phase,stance,reward,w_mar,done_reason";

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub tick: u64,
    pub t: f64,
    pub x_w: f64,
    pub y_w: f64,
    pub z: f64,
    pub z_dot: f64,
    pub vx: f64,
    pub vy: f64,
    pub psi: f64,
    pub phase: f64,
    pub stance: i8,
    pub reward: f64,
    pub w_mar: f64,
    pub done_reason: Option<DoneReason>,
}

impl TrajectoryRow {
    pub fn to_csv_line(&self) -> String {
        let mut s = String::new();
        write!(
            s,
            "{},{:.2},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.4},{},{:.6},{:.6},{}",
            self.tick,
            self.t,
            self.x_w,
            self.y_w,
            self.z,
            self.z_dot,
            self.vx,
            self.vy,
            self.psi,
            self.phase,
            self.stance,
            self.reward,
            self.w_mar,
            self.done_reason.map(|d| d.name()).unwrap_or("")
        )
        .expect("writing to a String cannot fail");
        s
    }
}

pub fn write_trajectory_csv(path: &Path, rows: &[TrajectoryRow]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.to_csv_line())?;
    }
    out.flush()?;
    Ok(())
}
