use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};
use sgnlab_cli::config::ExperimentConfig;
use sgnlab_cli::pipeline::{self, Stages};
use sgnlab_cli::report::ReportWriter;
use sgnlab_cli::Result;

#[derive(Parser)]
#[command(name = "sgnlab", version, about = "Gradient-noise experiments for SGD")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true, default_value = "sgnlab.toml")]
    config: PathBuf,
    /// Override every seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (defaults to the config's output_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Analyze this checkpoint file instead of training.
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Train and save checkpoints.
    Train,
    /// Sample gradient noise at each checkpoint and batch size.
    Probe,
    /// Shapiro-Wilk Gaussianity sweep.
    Gaussianity,
    /// Berry-Esseen moment distributions (includes the Gaussianity sweep).
    Bounds,
    /// Tail-index sweep.
    Tailindex,
    /// Langevin steady-state campaign on a quadratic potential.
    Langevin,
    /// Everything.
    Report,
}

fn run(cli: &Cli) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(n) = cli.workers {
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let writer = ReportWriter::new(out, &cfg)?;
    info!("config hash {}", writer.config_hash());
    let stages = match cli.command {
        Command::Train => {
            for p in pipeline::train_and_save(&cfg, &writer)? {
                println!("{}", p.display());
            }
            return Ok(());
        }
        Command::Probe => Stages { probe: true, ..Stages::default() },
        Command::Gaussianity => Stages { gaussianity: true, ..Stages::default() },
        Command::Bounds => Stages { bounds: true, ..Stages::default() },
        Command::Tailindex => Stages { tails: true, ..Stages::default() },
        Command::Langevin => Stages { langevin: true, ..Stages::default() },
        Command::Report => Stages::all(),
    };
    for p in pipeline::run(&cfg, stages, cli.checkpoint.as_deref(), &writer)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
