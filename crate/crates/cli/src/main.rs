use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod config;
mod dataset;
mod error;
mod report;
mod run;

use error::{CliError, CliResult};

/// Robust linear causal abstraction experiments.
///
/// Exit codes: 0 success, 1 usage, 2 configuration, 3 solver failure,
/// 4 missing artifacts.
#[derive(Parser, Debug)]
#[command(name = "diroca", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a model pair and interventional samples to a directory.
    Dataset {
        /// Built-in name (slc, lilucas) or path to a dataset JSON file.
        name: String,
        #[arg(long)]
        out: PathBuf,
        /// Samples per intervention and level.
        #[arg(long, default_value_t = dataset::DEFAULT_SAMPLES)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print ambiguity radii as JSON.
    Radius {
        /// Run config whose `concentration` block is used; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Fit every method on every fold.
    Train(RunArgs),
    /// Score trained maps over the contamination and misspecification grid.
    Eval(RunArgs),
    /// Aggregate results CSVs into per-figure curve files.
    Report {
        /// Results CSVs or run directories containing results.csv.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Run subdirectory name; `train` defaults to a timestamp, `eval` to the
    /// latest run.
    #[arg(long)]
    run_id: Option<String>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Overrides `root_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `io.data_dir`.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Overrides `io.output_dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.cmd {
        Command::Dataset { name, out, n, seed } => dataset::cmd_dataset(&name, &out, n, seed),
        Command::Radius { config } => run::cmd_radius(config.as_deref()),
        Command::Train(a) => run::cmd_train(&run::RunOptions::from_args(a)?),
        Command::Eval(a) => run::cmd_eval(&run::RunOptions::from_args(a)?),
        Command::Report { inputs, out } => report::cmd_report(&inputs, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { error::USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code as u8)
        }
    }
}
