use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fracsolve_cli::commands;
use fracsolve_cli::config::{self, ExperimentSpec};
use fracsolve_cli::CliError;
use fracsolve_core::solver::SolverMode;

/// Solver and benchmark driver for structured fractional programs.
#[derive(Parser)]
#[command(name = "fracsolve", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct SpecArgs {
    /// Experiment configuration file (sectioned key = value format).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset (l1sk, ct, ct-noise05, portfolio, sharpe); applied before
    /// the config file's overrides.
    #[arg(long)]
    preset: Option<String>,
    /// Base seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Solver mode override.
    #[arg(long, value_parser = ["fixed", "linesearch"])]
    mode: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset and its manifest.
    Gen {
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Run one solve and write result, trace, and solution files.
    Solve {
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Run repeated experiments and aggregate the metrics.
    Bench {
        #[command(flatten)]
        spec: SpecArgs,
        /// Worker threads for independent repetitions.
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Recompute metrics from a saved manifest and solution.
    Metrics {
        /// Directory holding manifest.json and solution.txt.
        #[arg(long)]
        out: PathBuf,
    },
}

fn resolve_spec(args: &SpecArgs) -> Result<ExperimentSpec, CliError> {
    let mut spec = match (&args.config, &args.preset) {
        (Some(path), preset) => {
            let mut text = String::new();
            if let Some(name) = preset {
                // A preset flag acts as if the file began with it.
                text.push_str(&format!("[experiment]\npreset = {name}\n"));
            }
            text.push_str(&std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read config {}: {e}", path.display()))
            })?);
            config::parse_config(&text)?
        }
        (None, Some(name)) => config::preset(name)?,
        (None, None) => {
            return Err(CliError::Config(
                "provide --config and/or --preset".into(),
            ))
        }
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(out) = &args.out {
        spec.out_dir = out.clone();
    }
    if let Some(mode) = &args.mode {
        spec.solver.mode = match mode.as_str() {
            "fixed" => SolverMode::Fixed,
            _ => SolverMode::LineSearch,
        };
    }
    spec.validate()?;
    Ok(spec)
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Gen { spec } => {
            let spec = resolve_spec(spec)?;
            commands::cmd_gen(&spec)
        }
        Command::Solve { spec } => {
            let spec = resolve_spec(spec)?;
            commands::cmd_solve(&spec).map(|_| ())
        }
        Command::Bench { spec, threads } => {
            let spec = resolve_spec(spec)?;
            commands::cmd_bench(&spec, *threads).map(|_| ())
        }
        Command::Metrics { out } => commands::cmd_metrics(out).map(|_| ()),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
