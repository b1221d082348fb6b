//! Multi-controller comparison tables.
//!
//! A manifest lists controllers and, optionally, evaluation settings:
//!
//! ```text
//! [controllers]
//! mbc = expert
//! ppf = runs/ppf/final.ckpt      # relative to the manifest
//!
//! [settings]
//! seeds = 5
//! first_seed = 0
//! scenarios = flat, slope:14, sequence
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{
    run_eval, violation_error_scatter, weight_histogram, Controller, EpisodeResult, EvalConfig,
    Scenario,
};
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::nn::Checkpoint;

pub const COMPARISON_FILE: &str = "comparison.csv";
pub const EPISODES_FILE: &str = "episodes.csv";
pub const HISTOGRAM_FILE: &str = "histogram.csv";
pub const SCATTER_FILE: &str = "scatter.csv";

pub const EPISODES_HEADER: &str = "controller,scenario,seed,success,distance,level_reached,\
tracking_error,error_absolute,ang_error,mean_abs_zdot,mean_w,fall_reason,ticks";

#[derive(Debug, Clone, PartialEq)]
pub enum ManifestEntry {
    Expert,
    Checkpoint(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub controllers: Vec<(String, ManifestEntry)>,
    pub seeds: u64,
    /// Episodes use seeds `first_seed .. first_seed + seeds`.
    pub first_seed: u64,
    pub scenarios: Vec<Scenario>,
}

impl Manifest {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut controllers: Vec<(String, ManifestEntry)> = Vec::new();
        let mut seeds = 5;
        let mut first_seed = 0;
        let mut scenarios = Scenario::standard_set();
        let mut section = String::from("controllers");
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let err = |msg: String| Error::InvalidConfig(format!("manifest line {lineno}: {msg}"));
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                if section != "controllers" && section != "settings" {
                    return Err(err(format!("unknown section [{section}]")));
                }
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err("expected `key = value`".into()))?;
            if key.is_empty() || value.is_empty() {
                return Err(err("empty key or value".into()));
            }
            match section.as_str() {
                "controllers" => {
                    if controllers.iter().any(|(l, _)| l == key) {
                        return Err(err(format!("duplicate controller `{key}`")));
                    }
                    let entry = if value == "expert" {
                        ManifestEntry::Expert
                    } else {
                        ManifestEntry::Checkpoint(base.join(value))
                    };
                    controllers.push((key.to_string(), entry));
                }
                _ => match key {
                    "seeds" => {
                        seeds = value
                            .parse()
                            .ok()
                            .filter(|&s: &u64| s > 0)
                            .ok_or_else(|| err(format!("seeds must be a positive integer, got `{value}`")))?;
                    }
                    "first_seed" => {
                        first_seed = value
                            .parse()
                            .map_err(|_| err(format!("first_seed must be an integer, got `{value}`")))?;
                    }
                    "scenarios" => {
                        scenarios = value
                            .split(',')
                            .map(|s| s.trim().parse())
                            .collect::<Result<_>>()
                            .map_err(|e| err(e.to_string()))?;
                    }
                    _ => return Err(err(format!("unknown setting `{key}`"))),
                },
            }
        }
        if controllers.is_empty() {
            return Err(Error::InvalidConfig("manifest lists no controllers".into()));
        }
        Ok(Self {
            controllers,
            seeds,
            first_seed,
            scenarios,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    /// `(controller, scenario, episodes)` in manifest × scenario order.
    pub results: Vec<(String, Scenario, Vec<EpisodeResult>)>,
    /// Controllers whose checkpoint could not be loaded, with the reason.
    pub missing: Vec<(String, String)>,
    /// Least-squares violation/error slope per controller on the scatter course.
    pub scatter_slopes: Vec<(String, f64)>,
}

fn fmt_reason(r: &EpisodeResult) -> &'static str {
    r.metrics.fall_reason.map_or("", |d| d.name())
}

pub fn write_episodes_csv(
    path: &Path,
    rows: &[(String, Scenario, Vec<EpisodeResult>)],
) -> Result<()> {
    let mut s = String::new();
    writeln!(s, "{EPISODES_HEADER}").expect("string write");
    for (label, sc, eps) in rows {
        for e in eps {
            let m = &e.metrics;
            writeln!(
                s,
                "{label},{sc},{},{},{},{},{},{},{},{},{},{},{}",
                e.seed,
                m.success as u8,
                m.distance,
                m.level_reached,
                m.tracking_error,
                m.error_absolute as u8,
                m.ang_error,
                m.mean_abs_zdot,
                m.mean_w,
                fmt_reason(e),
                m.ticks
            )
            .expect("string write");
        }
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Course used for the histogram's "hard" side and for the scatter: the
/// steepest slope in the set, else the last course.
fn hardest(scenarios: &[Scenario]) -> Option<Scenario> {
    scenarios
        .iter()
        .filter_map(|s| match s {
            Scenario::Slope { degrees } => Some((*degrees, *s)),
            _ => None,
        })
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, s)| s)
        .or_else(|| scenarios.last().copied())
}

/// Evaluates every controller on every course and writes `comparison.csv`,
/// `episodes.csv`, `histogram.csv` and `scatter.csv` into `out_dir`.
/// Controllers whose checkpoint cannot be loaded are reported in
/// [`CompareOutcome::missing`] and left out of the tables.
pub fn compare_variants(
    manifest: &Manifest,
    env_cfg: &EnvConfig,
    eval_cfg: &EvalConfig,
    out_dir: &Path,
) -> Result<CompareOutcome> {
    let seeds: Vec<u64> = (manifest.first_seed..manifest.first_seed + manifest.seeds).collect();
    let w0 = env_cfg.mar.w0();
    let mut results = Vec::new();
    let mut missing = Vec::new();
    let mut loaded: Vec<(String, Option<Checkpoint>)> = Vec::new();
    for (label, entry) in &manifest.controllers {
        match entry {
            ManifestEntry::Expert => loaded.push((label.clone(), None)),
            ManifestEntry::Checkpoint(p) => match Checkpoint::load(p) {
                Ok(c) => loaded.push((label.clone(), Some(c))),
                Err(e) => missing.push((label.clone(), format!("{}: {e}", p.display()))),
            },
        }
    }
    for (label, ckpt) in &loaded {
        let controller = match ckpt {
            None => Controller::Expert,
            Some(c) => Controller::Policy(&c.policy),
        };
        for sc in &manifest.scenarios {
            let eps = run_eval(controller, sc, &seeds, env_cfg, eval_cfg)?;
            results.push((label.clone(), *sc, eps));
        }
    }

    write_episodes_csv(&out_dir.join(EPISODES_FILE), &results)?;

    let hard = hardest(&manifest.scenarios);
    let flat = manifest
        .scenarios
        .iter()
        .find(|s| matches!(s, Scenario::Flat { .. }))
        .copied();

    // Histogram: flat versus hardest course, per controller.
    let mut hist = String::from("controller,scenario,bin,lo,hi,mass\n");
    let edges = [0.0, w0 / 3.0, 2.0 * w0 / 3.0, w0];
    // Scatter: hardest course.
    let mut scatter = String::from("controller,seed,abs_zdot,tracking_error\n");
    let mut scatter_slopes = Vec::new();
    for (label, _) in &loaded {
        for sc in [flat, hard].into_iter().flatten() {
            let Some((_, _, eps)) = results.iter().find(|(l, s, _)| l == label && *s == sc) else {
                continue;
            };
            let ws: Vec<f64> = eps.iter().flat_map(|e| e.samples.iter().map(|t| t.w)).collect();
            if w0 > 0.0 && !ws.is_empty() {
                let h = weight_histogram(&ws, w0, 3)?;
                for (b, m) in h.iter().enumerate() {
                    writeln!(hist, "{label},{sc},{b},{},{},{m}", edges[b], edges[b + 1])
                        .expect("string write");
                }
            }
            if Some(sc) == hard {
                let mut points = Vec::new();
                for e in eps {
                    for t in &e.samples {
                        if let Some(err) = t.error {
                            points.push((t.z_dot.abs(), err));
                            writeln!(scatter, "{label},{},{},{err}", e.seed, t.z_dot.abs())
                                .expect("string write");
                        }
                    }
                }
                scatter_slopes.push((label.clone(), violation_error_scatter(points).slope));
            }
        }
    }
    std::fs::write(out_dir.join(HISTOGRAM_FILE), hist)?;
    std::fs::write(out_dir.join(SCATTER_FILE), scatter)?;

    // Wide table: one row per controller.
    let mut table = String::from("controller,seeds");
    for sc in &manifest.scenarios {
        write!(table, ",{sc}_success_pct,{sc}_track_err").expect("string write");
    }
    table.push_str(",level_reached,scatter_slope\n");
    let has_sequence = manifest.scenarios.contains(&Scenario::Sequence);
    for (label, _) in &loaded {
        write!(table, "{label},{}", manifest.seeds).expect("string write");
        let mut levels = Vec::new();
        for (l, sc, eps) in &results {
            if l != label {
                continue;
            }
            let n = eps.len() as f64;
            let succ = 100.0 * eps.iter().filter(|e| e.metrics.success).count() as f64 / n;
            let err = eps.iter().map(|e| e.metrics.tracking_error).sum::<f64>() / n;
            write!(table, ",{succ},{err}").expect("string write");
            if !has_sequence || *sc == Scenario::Sequence {
                levels.extend(eps.iter().map(|e| e.metrics.level_reached));
            }
        }
        let level = levels.iter().sum::<f64>() / levels.len().max(1) as f64;
        let slope = scatter_slopes
            .iter()
            .find(|(l, _)| l == label)
            .map_or(f64::NAN, |s| s.1);
        writeln!(table, ",{level},{slope}").expect("string write");
    }
    std::fs::write(out_dir.join(COMPARISON_FILE), table)?;

    Ok(CompareOutcome {
        results,
        missing,
        scatter_slopes,
    })
}
