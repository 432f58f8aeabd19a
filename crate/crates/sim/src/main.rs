use std::io::{ErrorKind, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use bwturbo_core::receiver::Mode;
use bwturbo_sim::config::{self, ExperimentConfig, Origin};
use bwturbo_sim::experiment;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bwturbo",
    version,
    about = "Joint blind channel estimation and turbo equalization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo sweep and write the CSV results.
    Run {
        /// key = value configuration file; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// SNR grid in dB, comma separated.
        #[arg(long = "snr-db", value_delimiter = ',', allow_hyphen_values = true)]
        snr_db: Option<Vec<f64>>,
        /// Receiver mode; repeat or comma-separate for several.
        #[arg(long, value_delimiter = ',', value_parser = config::parse_mode)]
        mode: Option<Vec<Mode>>,
        /// Frames per (mode, SNR) cell.
        #[arg(long)]
        frames: Option<usize>,
        /// Master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output CSV path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a configuration file.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: Option<&PathBuf>) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply_env(std::env::vars())?;
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run {
            config,
            snr_db,
            mode,
            frames,
            seed,
            out,
        } => {
            let mut cfg = load(config.as_ref())?;
            if let Some(v) = snr_db {
                cfg.snr_db = v;
            }
            if let Some(m) = mode {
                cfg.modes = m;
            }
            if let Some(n) = frames {
                cfg.set("n_frames", &n.to_string(), Origin::Flag)?;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.output = o;
            }
            cfg.validate()?;
            let rows = experiment::run_experiment(&cfg)
                .with_context(|| format!("experiment writing to {}", cfg.output.display()))?;
            let mut out = std::io::stdout().lock();
            write!(out, "{}", experiment::summary(&rows))?;
            writeln!(out, "wrote {} rows to {}", rows.len(), cfg.output.display())?;
        }
        Command::Validate { config } => {
            let cfg = load(Some(&config))?;
            cfg.validate()?;
            writeln!(std::io::stdout().lock(), "{}: ok", config.display())?;
        }
    }
    Ok(())
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.downcast_ref::<std::io::Error>()
        .is_some_and(|io| io.kind() == ErrorKind::BrokenPipe)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
