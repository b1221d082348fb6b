//! `ppf`: pretraining, fine-tuning, evaluation and comparison runs.
//!
//! Failures print one machine-readable line on stderr,
//! `{"error":"<kind>","message":"<text>"}`, and exit nonzero:
//! 2 for usage and configuration errors, 3 when `compare` had to skip
//! missing checkpoints, 1 for everything else.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ppf_core::config::RunConfig;
use ppf_core::eval::{
    compare_variants, run_eval, write_episodes_csv, Controller, EvalConfig, Manifest, Scenario,
};
use ppf_core::nn::Checkpoint;
use ppf_core::trainer::{dagger_pretrain, finetune, Variant};
use ppf_core::env::write_trajectory_csv;

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "-", env!("PPF_GIT_DESCRIBE"));

#[derive(Parser)]
#[command(name = "ppf", version = VERSION, about = "Expert-regularized biped policy training")]
struct Cli {
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for rollouts (falls back to PPF_WORKERS, then the config).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Distill the expert into a policy with DAgger.
    Pretrain {
        #[command(flatten)]
        common: Common,
    },
    /// PPO fine-tuning with the selected regularization.
    Finetune {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        variant: Variant,
        /// Pretrained checkpoint; required by every variant but purerl.
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Evaluate a checkpoint, or the expert when --ckpt is absent.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ckpt: Option<PathBuf>,
        #[arg(long)]
        scenario: Scenario,
        #[arg(long)]
        seeds: Option<u64>,
    },
    /// Evaluate every controller in a manifest on a set of courses.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Run the expert for one recorded episode.
    ExpertDemo {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scenario: Scenario,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Config(String),
    Missing(String),
    Run(String),
}

impl Failure {
    fn kind(&self) -> &'static str {
        match self {
            Failure::Usage(_) => "usage",
            Failure::Config(_) => "config",
            Failure::Missing(_) => "missing_artifacts",
            Failure::Run(_) => "runtime",
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Config(m) | Failure::Missing(m) | Failure::Run(m) => m,
        }
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Config(_) => 2,
            Failure::Missing(_) => 3,
            Failure::Run(_) => 1,
        }
    }
}

impl From<ppf_core::Error> for Failure {
    fn from(e: ppf_core::Error) -> Self {
        match e {
            ppf_core::Error::Config { .. } | ppf_core::Error::InvalidConfig(_) => {
                Failure::Config(e.to_string())
            }
            other => Failure::Run(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

fn json_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out
}

fn report(f: &Failure) -> ExitCode {
    eprintln!(
        "{{\"error\":\"{}\",\"message\":\"{}\"}}",
        f.kind(),
        json_escape(f.message())
    );
    ExitCode::from(f.code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let msg = e.kind().to_string();
            return report(&Failure::Usage(msg));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(&f),
    }
}

fn workers_from_env() -> Result<Option<usize>, Failure> {
    match std::env::var("PPF_WORKERS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| Failure::Usage(format!("PPF_WORKERS must be a positive integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

/// Loads the config, applies command-line overrides and prepares the
/// output directory with the effective config and run description.
fn setup(
    cli_seed: Option<u64>,
    cli_workers: Option<usize>,
    common: &Common,
    adjust: impl FnOnce(&mut RunConfig) -> Result<(), Failure>,
) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            ppf_core::Error::Io(io) => Failure::Usage(format!("{}: {io}", p.display())),
            other => other.into(),
        })?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli_seed {
        cfg.train.seed = s;
    }
    match cli_workers {
        Some(0) => return Err(Failure::Usage("--workers must be >= 1".into())),
        Some(w) => cfg.train.workers = w,
        None => {
            if let Some(w) = workers_from_env()? {
                cfg.train.workers = w;
            }
        }
    }
    cfg.out = Some(common.out.clone());
    adjust(&mut cfg)?;
    cfg.validate()?;
    std::fs::create_dir_all(&common.out)?;
    std::fs::write(common.out.join("config.ini"), cfg.to_ini())?;
    let args: Vec<String> = std::env::args().skip(1).collect();
    std::fs::write(
        common.out.join("run.txt"),
        format!(
            "version = {VERSION}\nseed = {}\ncommand = ppf {}\n",
            cfg.train.seed,
            args.join(" ")
        ),
    )?;
    Ok(cfg)
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, Failure> {
    Checkpoint::load(path).map_err(|e| Failure::Run(format!("{}: {e}", path.display())))
}

fn eval_seeds(cfg: &RunConfig, count: u64) -> Vec<u64> {
    (cfg.train.seed..cfg.train.seed + count).collect()
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Pretrain { common } => {
            let cfg = setup(cli.seed, cli.workers, common, |_| Ok(()))?;
            let out = dagger_pretrain(&cfg.train, &cfg.env)?;
            let mut csv = String::from("iteration,loss\n");
            for (i, l) in out.loss_curve.iter().enumerate() {
                writeln!(csv, "{i},{l}").expect("string write");
            }
            std::fs::write(common.out.join("pretrain_loss.csv"), csv)?;
            out.checkpoint.save(&common.out.join("pretrain.ckpt"))?;
            println!(
                "pretrained on {} samples, final loss {:.3e}",
                out.samples_seen,
                out.loss_curve.last().copied().unwrap_or(f64::NAN)
            );
        }
        Command::Finetune {
            common,
            variant,
            init,
        } => {
            // Checked before anything touches the disk or the CPU.
            match (variant.requires_init(), init) {
                (true, None) => {
                    return Err(Failure::Usage(format!("variant {variant} requires --init")))
                }
                (false, Some(_)) => {
                    return Err(Failure::Usage(format!("variant {variant} trains from scratch; drop --init")))
                }
                _ => {}
            }
            let init = init.as_deref().map(load_checkpoint).transpose()?;
            let cfg = setup(cli.seed, cli.workers, common, |c| {
                c.train.variant = *variant;
                Ok(())
            })?;
            let out = finetune(&cfg.train, &cfg.env, init, Some(&common.out))?;
            if let Some(m) = out.metrics.last() {
                println!(
                    "{} iterations, final lin tracking {:.3}, terrain level {:.2}",
                    out.metrics.len(),
                    m.lin_tracking,
                    m.terrain_level
                );
            }
        }
        Command::Eval {
            common,
            ckpt,
            scenario,
            seeds,
        } => {
            let ckpt = ckpt.as_deref().map(load_checkpoint).transpose()?;
            let cfg = setup(cli.seed, cli.workers, common, |c| {
                match seeds {
                    Some(0) => return Err(Failure::Usage("--seeds must be >= 1".into())),
                    Some(n) => c.eval.seeds = *n,
                    None => {}
                }
                Ok(())
            })?;
            let (label, controller) = match &ckpt {
                Some(c) => ("policy", Controller::Policy(&c.policy)),
                None => ("expert", Controller::Expert),
            };
            let results = run_eval(
                controller,
                scenario,
                &eval_seeds(&cfg, cfg.eval.seeds),
                &cfg.env,
                &cfg.eval.eval,
            )?;
            let n = results.len() as f64;
            let success = results.iter().filter(|r| r.metrics.success).count();
            let err = results.iter().map(|r| r.metrics.tracking_error).sum::<f64>() / n;
            write_episodes_csv(
                &common.out.join("episodes.csv"),
                &[(label.to_string(), *scenario, results)],
            )?;
            println!("{label} on {scenario}: {success}/{n} succeeded, tracking error {err:.2}");
        }
        Command::Compare { common, manifest } => {
            let mut m = Manifest::load(manifest).map_err(|e| match e {
                ppf_core::Error::Io(io) => Failure::Usage(format!("{}: {io}", manifest.display())),
                other => other.into(),
            })?;
            let cfg = setup(cli.seed, cli.workers, common, |_| Ok(()))?;
            if cli.seed.is_some() {
                m.first_seed = cfg.train.seed;
            }
            let out = compare_variants(&m, &cfg.env, &cfg.eval.eval, &common.out)?;
            for (label, slope) in &out.scatter_slopes {
                println!("{label}: violation-error slope {slope:.3}");
            }
            if !out.missing.is_empty() {
                let list: Vec<String> = out.missing.iter().map(|(l, why)| format!("{l} ({why})")).collect();
                return Err(Failure::Missing(format!(
                    "partial table written; missing: {}",
                    list.join("; ")
                )));
            }
        }
        Command::ExpertDemo { common, scenario } => {
            let cfg = setup(cli.seed, cli.workers, common, |_| Ok(()))?;
            let eval_cfg = EvalConfig {
                record_trajectory: true,
                ..cfg.eval.eval
            };
            let mut results = run_eval(
                Controller::Expert,
                scenario,
                &[cfg.train.seed],
                &cfg.env,
                &eval_cfg,
            )?;
            write_trajectory_csv(&common.out.join("trajectory.csv"), &results[0].trajectory)?;
            for r in &mut results {
                r.trajectory.clear();
            }
            let m = results[0].metrics.clone();
            write_episodes_csv(
                &common.out.join("episodes.csv"),
                &[("expert".to_string(), *scenario, results)],
            )?;
            println!(
                "expert on {scenario}: {} after {:.2} m, tracking error {:.2}",
                if m.success { "success" } else { "failure" },
                m.distance,
                m.tracking_error
            );
        }
    }
    Ok(())
}
