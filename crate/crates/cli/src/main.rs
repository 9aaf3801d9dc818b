use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod data;
mod settings;

/// Exit status 1: bad input or configuration. Exit status 2: numerical failure.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
}

impl From<countshrink::Error> for CliError {
    fn from(e: countshrink::Error) -> Self {
        if e.is_validation() || matches!(e, countshrink::Error::Io(_)) {
            CliError::Validation(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "countshrink", version, about = "Shrinkage estimation of Poisson rates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
pub struct Common {
    /// Flat `key = value` config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extra `key=value` settings (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Clone, Default)]
pub struct ModelFlags {
    /// IG, EH or PG.
    #[arg(long)]
    pub family: Option<String>,
    /// Initial γ (sampled unless fixed).
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model to a CSV of counts (columns id, y, offset, x1..xp).
    Fit(commands::FitArgs),
    /// Run the simulation study and write the metric tables.
    Simulate(commands::SimulateArgs),
    /// Marginal prior or posterior density of λ on a grid.
    Density(commands::DensityArgs),
    /// Posterior-mean bias λ̃(y) − y over counts.
    Bias(commands::BiasArgs),
    /// Summaries of a draws CSV.
    Summarize(commands::SummarizeArgs),
    /// Write a synthetic areal data set with covariates and offsets.
    Areal(commands::ArealArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Density(a) => commands::density(a),
        Command::Bias(a) => commands::bias(a),
        Command::Summarize(a) => commands::summarize(a),
        Command::Areal(a) => commands::areal(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical error: {msg}");
            ExitCode::from(2)
        }
    }
}
