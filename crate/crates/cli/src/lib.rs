//! Staged command-line workflow: `prepare` windows and images, `forecast`
//! with the systems under test, `rate` them, and `report` the ratings.

// `!(x >= 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod forecast;
pub mod prepare;
pub mod rate;
pub mod report;
pub mod workspace;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use config::RunConfig;
use workspace::Workspace;

/// Bad configuration or input; maps to exit code 2.
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

#[derive(Parser, Debug)]
#[command(
    name = "tsrate",
    version,
    about = "Rate forecasting systems for robustness to input perturbations"
)]
pub struct Cli {
    /// Run configuration (TOML)
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,

    /// Workspace directory; overrides the config
    #[arg(long, short, global = true, env = "TSRATE_WORKSPACE")]
    pub workspace: Option<PathBuf>,

    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// More log output (repeatable)
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build windows, perturbed variants, images and the exchange manifest
    Prepare,
    /// Run built-in systems and import external predictions
    Forecast,
    /// Score forecasts and assign ratings
    Rate {
        /// Rate a `metric,perturbation,system,score` table directly
        #[arg(long, value_name = "FILE")]
        from_scores: Option<PathBuf>,
        /// Rating levels for --from-scores (default: config value or 3)
        #[arg(long)]
        levels: Option<usize>,
        /// Also write ratings.csv / ratings.md here (with --from-scores)
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Regenerate rating reports from persisted scores
    Report,
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    message: String,
    exit_code: i32,
}

/// 2 for validation failures, 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<Invalid>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<tsrate_core::Error>() {
            return if e.is_validation() { 2 } else { 1 };
        }
    }
    1
}

/// Machine-readable error line for stderr.
pub fn error_record(err: &anyhow::Error) -> String {
    let code = exit_code(err);
    let kind = err
        .chain()
        .find_map(|c| c.downcast_ref::<tsrate_core::Error>().map(|e| e.kind()))
        .unwrap_or(if code == 2 { "validation" } else { "internal" });
    serde_json::to_string(&ErrorRecord {
        error: kind,
        message: format!("{err:#}"),
        exit_code: code,
    })
    .expect("error record serializes")
}

fn load_config(path: Option<&Path>) -> anyhow::Result<RunConfig> {
    let path = path.ok_or_else(|| Invalid("--config is required for this command".into()))?;
    RunConfig::load(path)
}

fn workspace(cli: &Cli, cfg: Option<&RunConfig>) -> anyhow::Result<Workspace> {
    cli.workspace
        .clone()
        .or_else(|| cfg.and_then(|c| c.data.workspace.clone()))
        .map(Workspace::new)
        .ok_or_else(|| {
            Invalid("no workspace: pass --workspace, set TSRATE_WORKSPACE, or set data.workspace".into()).into()
        })
}

fn pool(threads: Option<usize>) -> anyhow::Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Invalid("--threads must be >= 1".into()).into());
        }
        b = b.num_threads(n);
    }
    Ok(b.build()?)
}

/// Runs one command, printing its summary to stdout.
pub fn run(cli: Cli) -> anyhow::Result<()> {
    let pool = pool(cli.threads)?;
    match &cli.command {
        Command::Rate {
            from_scores: Some(path),
            levels,
            out,
        } => {
            let cfg = cli.config.as_deref().map(RunConfig::load).transpose()?;
            let levels = levels
                .or(cfg.map(|c| c.rating.levels))
                .unwrap_or(tsrate_core::rating::DEFAULT_LEVELS);
            if levels == 0 {
                return Err(Invalid("--levels must be >= 1".into()).into());
            }
            let mut scores = report::read_scores(path)?;
            report::sort_scores(&mut scores);
            let tables = report::build_tables(&scores, levels)?;
            let md = report::render_markdown(&tables, &[]);
            if let Some(dir) = out {
                std::fs::create_dir_all(dir)?;
                report::write_ratings_csv(&dir.join("ratings.csv"), &tables)?;
                workspace::write_text(&dir.join("ratings.md"), &md)?;
            }
            print!("{md}");
        }
        Command::Report => {
            let cfg = cli.config.as_deref().map(RunConfig::load).transpose()?;
            let ws = workspace(&cli, cfg.as_ref())?;
            let levels = cfg.map_or(tsrate_core::rating::DEFAULT_LEVELS, |c| c.rating.levels);
            print!("{}", report::run(&ws, levels)?);
        }
        cmd => {
            let cfg = load_config(cli.config.as_deref())?;
            let ws = workspace(&cli, Some(&cfg))?;
            ws.write_lock(&cfg.to_lock())?;
            pool.install(|| -> anyhow::Result<()> {
                match cmd {
                    Command::Prepare => {
                        let s = prepare::run(&cfg, &ws)?;
                        let total: usize = s.windows.values().sum();
                        println!(
                            "prepared perturbations={} windows={total} images={} skipped_entities={}",
                            s.windows.len(),
                            s.images,
                            s.skipped_entities
                        );
                    }
                    Command::Forecast => {
                        let s = forecast::run(&cfg, &ws)?;
                        println!(
                            "forecast systems={} records={} na={} failed={}",
                            s.systems, s.records, s.na, s.failed
                        );
                    }
                    Command::Rate { .. } => {
                        let s = rate::run(&cfg, &ws)?;
                        println!(
                            "systems={} perturbations={} windows={}",
                            s.systems, s.perturbations, s.windows
                        );
                    }
                    Command::Report => unreachable!("handled above"),
                }
                Ok(())
            })?;
        }
    }
    Ok(())
}
