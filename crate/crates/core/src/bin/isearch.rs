//! Command-line driver: single demo episodes, Monte Carlo batches and
//! sensing-scale sweeps.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use isearch::config::RunConfig;
use isearch::montecarlo::{export_histogram, run_batch, sweep_csv, sweep_sensing_scale};
use isearch::{Outcome, StrategyKind};

#[derive(Parser)]
#[command(name = "isearch", version, about = "Intermittent information-driven search simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and write its trace and final threat map.
    Demo(Common),
    /// Run a Monte Carlo batch and write statistics and a histogram.
    Mc(Common),
    /// Run one batch per sensing scale.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated values of the sensing scale `a`.
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6")]
        values: Vec<f64>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed (base seed for batches).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// `intermittent` or `pure_infotaxis`.
    #[arg(long)]
    strategy: Option<StrategyKind>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.base_seed = seed;
        }
        if let Some(runs) = self.runs {
            cfg.runs = runs;
        }
        if let Some(workers) = self.workers {
            cfg.workers = workers;
        }
        if let Some(kind) = self.strategy {
            cfg.strategy.strategy_kind = kind;
        }
        cfg.batch().validate()?;
        std::fs::create_dir_all(&self.out)
            .with_context(|| format!("creating output directory {}", self.out.display()))?;
        Ok(cfg)
    }
}

/// Write-then-rename so readers never see a partial file.
fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(&target)
        .with_context(|| format!("writing {}", target.display()))?;
    log::info!("wrote {}", target.display());
    Ok(())
}

fn demo(common: &Common) -> Result<ExitCode> {
    let cfg = common.load()?;
    let mut episode = cfg.episode(cfg.base_seed);
    episode.trace = true;
    let (result, map) = isearch::engine::run_episode_with_map(&episode)?;

    let mut lines = String::new();
    for entry in result.trace.as_deref().unwrap_or_default() {
        lines.push_str(&serde_json::to_string(entry)?);
        lines.push('\n');
    }
    write_atomic(&common.out, "trace.jsonl", &lines)?;
    write_atomic(&common.out, "final_map.json", &map.to_json())?;

    let mut summary = result.clone();
    summary.trace = None;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(match result.outcome {
        Outcome::FoundCorrect => ExitCode::SUCCESS,
        Outcome::Timeout => ExitCode::from(2),
        Outcome::FoundWrong => ExitCode::from(3),
    })
}

fn mc(common: &Common) -> Result<ExitCode> {
    let cfg = common.load()?;
    let stats = run_batch(&cfg.batch())?;
    write_atomic(&common.out, "stats.json", &stats.to_json())?;
    write_atomic(&common.out, "histogram.csv", &export_histogram(&stats, cfg.bin_width))?;
    println!(
        "runs {}  success {:.4}  wrong {:.4}  timeout {:.4}  mean {}  median {}",
        stats.runs,
        stats.success_rate,
        stats.wrong_rate,
        stats.timeout_rate,
        fmt_opt(stats.mean_time),
        fmt_opt(stats.median_time),
    );
    Ok(ExitCode::SUCCESS)
}

fn sweep(common: &Common, values: &[f64]) -> Result<ExitCode> {
    let cfg = common.load()?;
    let points = sweep_sensing_scale(&cfg.batch(), values);
    for p in &points {
        match &p.stats {
            Ok(s) => println!("a = {}: mean {}  success {:.4}", p.a, fmt_opt(s.mean_time), s.success_rate),
            Err(e) => eprintln!("a = {}: {e}", p.a),
        }
    }
    write_atomic(&common.out, "sweep.csv", &sweep_csv(&points))?;
    Ok(ExitCode::SUCCESS)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|t| format!("{t:.1}")).unwrap_or_else(|| "n/a".into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Demo(c) => demo(c),
        Command::Mc(c) => mc(c),
        Command::Sweep { common, values } => sweep(common, values),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
