use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use rwrs_lab::{parse_config, run, Mode, RunError};
use serde_json::json;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Slln,
    Theorem3,
    ScalingAlpha,
    ScalingOccupancy,
    Subseq,
    Varbound,
    Covbound,
}

impl From<Command> for Mode {
    fn from(c: Command) -> Mode {
        match c {
            Command::Slln => Mode::Slln,
            Command::Theorem3 => Mode::Theorem3,
            Command::ScalingAlpha => Mode::ScalingAlpha,
            Command::ScalingOccupancy => Mode::ScalingOccupancy,
            Command::Subseq => Mode::Subseq,
            Command::Varbound => Mode::Varbound,
            Command::Covbound => Mode::Covbound,
        }
    }
}

/// Random walk in random scenery diagnostics.
///
/// Exit status: 0 when every configured rule passes, 1 when a rule fails,
/// 2 on configuration or runtime errors.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON configuration file (a previous run's manifest.json also works).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; defaults to the number of available cores.
    #[arg(long, env = "RWRS_LAB_THREADS")]
    threads: Option<usize>,
    /// Overrides the configured base seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = parse_config(&cli.config)
        .map_err(RunError::from)
        .and_then(|config| {
            let config = match cli.seed {
                Some(seed) => config.with_seed(seed),
                None => config,
            };
            run(cli.command.into(), &config, Some(&cli.config), &cli.out, cli.threads.filter(|&n| n > 0))
        });
    match result {
        Ok(summary) if summary.passed => ExitCode::SUCCESS,
        Ok(summary) => {
            println!("{}", json!({ "passed": false, "failures": summary.failures }));
            eprintln!("{} of {} rules failed", summary.failures.len(), summary.rules.len());
            ExitCode::from(1)
        }
        Err(e) => {
            println!("{}", e.to_json());
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
