use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use robust_accb::experiment::{self, ExperimentConfig, ExperimentId};
use robust_accb::features::EnvKind;
use robust_accb::{Error, Result};

/// Robust actor-critic contextual bandit experiments.
#[derive(Debug, Parser)]
#[command(name = "robust-accb", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment sweep and write its results as CSV.
    Run {
        /// s1 (methods), s2 (outlier ratio), s3 (outlier strength) or s4 (threshold scale).
        experiment: ExperimentId,
        #[arg(long, default_value = "heartsteps")]
        dataset: EnvKind,
        /// Flat `key = value` file overriding the built-in defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        users: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let Command::Run {
        experiment,
        dataset,
        config,
        out,
        seeds,
        users,
    } = cli.command;
    let mut cfg = ExperimentConfig::new(experiment, dataset);
    if let Some(path) = &config {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        cfg.apply_overrides(&text)?;
    }
    if let Some(seeds) = seeds {
        cfg.seeds = seeds;
    }
    if let Some(users) = users {
        cfg.users = users;
    }
    let out = out.or_else(|| cfg.output.clone()).ok_or_else(|| {
        Error::Input("no output path: pass --out or set `out` in the config".into())
    })?;

    let rows = experiment::run(experiment, &cfg)?;
    experiment::write_csv(&rows, &out)?;
    eprintln!("wrote {} rows to {}", rows.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
