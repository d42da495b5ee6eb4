use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nestqmc::cli::{self, ExperimentConfig};
use nestqmc::Error;

#[derive(Debug, Parser)]
#[command(name = "nestqmc", version, about = "Nested MLMC estimation of portfolio loss probabilities")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (flat key = value file).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `run.out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Print the loss threshold and the initial portfolio value.
    Calibrate,
    /// Fixed-budget per-level statistics and fitted rates.
    Convergence,
    /// Cost and error of repeated MLMC runs over the tolerance list.
    Complexity,
    /// One MLMC estimate per coupling and tolerance.
    Estimate,
    /// Inner-variance decay per outer scenario.
    Eta,
}

fn run(args: &Args) -> Result<(), Error> {
    let path = args
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".to_string()))?;
    let mut config = ExperimentConfig::from_file(path)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.out = out.clone();
    }
    if let Some(threads) = args.threads {
        if threads == 0 {
            return Err(Error::Config("--threads must be positive".to_string()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match args.command {
        Command::Calibrate => cli::cmd_calibrate(&config, &mut out),
        Command::Convergence => cli::cmd_convergence(&config, &mut out),
        Command::Complexity => cli::cmd_complexity(&config, &mut out),
        Command::Estimate => cli::cmd_estimate(&config, &mut out),
        Command::Eta => cli::cmd_eta(&config, &mut out),
    }?;
    out.flush().ok();
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let code = if e.use_stderr() { cli::EXIT_CONFIG } else { cli::EXIT_SUCCESS };
            e.print().ok();
            return ExitCode::from(code as u8);
        }
    };
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
