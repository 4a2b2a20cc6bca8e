//! `mepkit` command-line runner.
//!
//! Exit codes: 0 on success, 1 on any error, 2 when a solve stops before
//! reaching its residual tolerance.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Status;
use config::{CommonArgs, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "mepkit", version, about = "Maximum-entropy reconstruction of long-context joints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a constraint system, reduce it and solve for the maxent joint.
    Solve,
    /// Check the conditioning inequalities on random or given joints.
    Verify {
        /// Number of random joints.
        #[arg(long)]
        trials: Option<usize>,
        /// Variables per random joint.
        #[arg(long)]
        vars: Option<usize>,
    },
    /// Sweep T and alphabet sizes; write dual dimensions and timings as CSV.
    Benchmark {
        #[arg(long)]
        t_min: Option<usize>,
        #[arg(long)]
        t_max: Option<usize>,
    },
    /// Sample a sequence autoregressively from a solved joint.
    Generate {
        /// Solve result JSON; solves from the config when absent.
        #[arg(long)]
        input: Option<std::path::PathBuf>,
        #[arg(long)]
        length: Option<usize>,
        #[arg(long)]
        temperature: Option<f64>,
    },
    /// Tabulate entropy and spread of the geometric model.
    Geometric {
        /// Comma-separated means.
        #[arg(long, value_delimiter = ',')]
        mu: Vec<f64>,
        #[arg(long)]
        tail_tolerance: Option<f64>,
    },
}

fn run(cli: Cli) -> anyhow::Result<Status> {
    let mut cfg = ExperimentConfig::resolve(&cli.common)?;
    match cli.command {
        Command::Solve => commands::solve(&cfg),
        Command::Verify { trials, vars } => {
            cfg.trials = trials.unwrap_or(cfg.trials);
            cfg.vars = vars.unwrap_or(cfg.vars);
            commands::verify(&cfg)
        }
        Command::Benchmark { t_min, t_max } => {
            cfg.t_range = (t_min.unwrap_or(cfg.t_range.0), t_max.unwrap_or(cfg.t_range.1));
            if cfg.t_range.0 > cfg.t_range.1 {
                anyhow::bail!("empty T range {:?}", cfg.t_range);
            }
            commands::benchmark(&cfg)
        }
        Command::Generate {
            input,
            length,
            temperature,
        } => {
            if let Some(p) = input {
                cfg.input = Some(p);
            }
            cfg.length = length.unwrap_or(cfg.length);
            cfg.temperature = temperature.unwrap_or(cfg.temperature);
            commands::generate(&cfg)
        }
        Command::Geometric { mu, tail_tolerance } => {
            if !mu.is_empty() {
                cfg.mus = mu;
            }
            cfg.tail_tolerance = tail_tolerance.unwrap_or(cfg.tail_tolerance);
            commands::geometric(&cfg)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Status::Success) => ExitCode::SUCCESS,
        Ok(Status::NotConverged) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
