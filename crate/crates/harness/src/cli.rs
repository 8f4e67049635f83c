//! Command-line front end.

use std::fs;
use std::io;
use std::path::PathBuf;

use clap::Parser;

use crate::config::ExperimentConfig;
use crate::experiments::run_experiment;
use crate::output::write_csv;
use crate::{HarnessError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "sparsepat",
    about = "Monte Carlo experiments for pilot-aided sparse block-fading channels"
)]
struct Cli {
    /// Experiment name; overrides the config file.
    #[arg(long)]
    experiment: Option<String>,
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated SNR grid in dB.
    #[arg(long = "snr-db", allow_hyphen_values = true)]
    snr_db: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(e) = &cli.experiment {
        cfg.set("experiment", e)?;
    }
    if let Some(s) = &cli.snr_db {
        cfg.set("snr_db", s)?;
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load(cli)?;
    let rows = run_experiment(&cfg)?;
    match &cfg.out {
        Some(path) => write_csv(io::BufWriter::new(fs::File::create(path)?), &rows)?,
        None => write_csv(io::stdout().lock(), &rows)?,
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the experiment and returns the
/// process exit code: 0 on success, 2 for usage or configuration errors, 1 otherwise.
pub fn cli_main<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                HarnessError::Config(_)
                | HarnessError::Spec(
                    sparsepat::Error::PilotPattern(_)
                    | sparsepat::Error::Config(_)
                    | sparsepat::Error::InvalidArgument(_),
                ) => 2,
                _ => 1,
            }
        }
    }
}
