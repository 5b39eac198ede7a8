use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use surface_forge::config::PipelineConfig;
use surface_forge::pipeline;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Harvest,
    Thin,
    Enrich,
    Match,
    Filter,
    Aggregate,
    Stats,
    Eval,
    Run,
}

/// Road-surface enrichment pipeline for OpenStreetMap.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    /// Stage to run; `run` runs all of them in order.
    #[arg(value_enum)]
    command: Command,
    /// Pipeline config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Worker threads; overrides the config.
    #[arg(long)]
    workers: Option<usize>,
    /// Stage directory; overrides the config.
    #[arg(long)]
    stage_dir: Option<PathBuf>,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = PipelineConfig::load(&cli.config)?;
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(d) = cli.stage_dir {
        cfg.stage_dir = d;
    }
    cfg.validate()?;
    pipeline::with_workers(cfg.workers, || match cli.command {
        Command::Harvest => pipeline::cmd_harvest(&cfg).map(drop),
        Command::Thin => pipeline::cmd_thin(&cfg).map(drop),
        Command::Enrich => pipeline::cmd_enrich(&cfg).map(drop),
        Command::Match => pipeline::cmd_match(&cfg).map(drop),
        Command::Filter => pipeline::cmd_filter(&cfg).map(drop),
        Command::Aggregate => pipeline::cmd_aggregate(&cfg).map(drop),
        Command::Stats => pipeline::cmd_stats(&cfg).map(drop),
        Command::Eval => pipeline::cmd_eval(&cfg).map(drop),
        Command::Run => pipeline::cmd_run(&cfg).map(drop),
    })?
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
