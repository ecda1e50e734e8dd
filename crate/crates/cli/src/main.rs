//! `gbn`: simulate, fit and analyse Gaussian Bayesian networks from the
//! command line.
//!
//! Exit codes: 0 on success, 2 for invalid input, 3 when the inputs are
//! valid but the requested quantity is degenerate (unidentified parameters,
//! singular information). `GBN_THREADS` caps the worker count.

mod commands;
mod error;
mod formats;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gbn_core::{Criterion, FitOptions};
use serde_json::Value;

use crate::commands::FisherOutput;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "gbn", version, about = "Gaussian Bayesian networks under observational and intervention data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a dataset from MODEL following DESIGN
    Simulate {
        model: PathBuf,
        design: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Omit the creation-time comment so output is byte-stable
        #[arg(long)]
        no_timestamp: bool,
    },
    /// Maximum-likelihood fit of DATA on the graph in MODEL
    Fit {
        /// Model or graph-only file
        model: PathBuf,
        data: PathBuf,
        /// Use the minimum-norm solution for singular systems
        #[arg(long)]
        least_squares: bool,
        /// Rescale sigma estimates to remove the small-sample bias
        #[arg(long)]
        bias_correct: bool,
    },
    /// Expected Fisher information of a design
    Fisher {
        model: PathBuf,
        /// Design file, or an integer N for N observational rows
        design: String,
        /// Also print the Cramér-Rao covariance and standard deviations
        #[arg(long)]
        crbound: bool,
        /// Print only the design score (d-opt or a-opt)
        #[arg(long)]
        score: Option<Criterion>,
    },
    /// Monte Carlo check of the estimator against the Cramér-Rao bound
    Mc {
        model: PathBuf,
        /// Design file, or an integer N for N observational rows
        design: String,
        #[arg(long)]
        reps: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Log-likelihood of DATA under MODEL
    Loglik { model: PathBuf, data: PathBuf },
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("GBN_THREADS") else {
        return Ok(());
    };
    let n = raw
        .trim()
        .parse::<usize>()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Input(format!("GBN_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Input(e.to_string()))
}

fn print_json(doc: &Value) {
    println!("{}", serde_json::to_string_pretty(doc).expect("JSON values serialize"));
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Simulate {
            model,
            design,
            seed,
            out,
            no_timestamp,
        } => commands::simulate(&model, &design, seed, &out, !no_timestamp),
        Command::Fit {
            model,
            data,
            least_squares,
            bias_correct,
        } => {
            let opts = FitOptions {
                least_squares,
                bias_correct,
            };
            let doc = commands::fit_cmd(&model, &data, opts)?;
            print_json(&doc);
            Ok(())
        }
        Command::Fisher {
            model,
            design,
            crbound,
            score,
        } => {
            match commands::fisher_cmd(&model, &design, crbound, score)? {
                FisherOutput::Document(doc) => print_json(&doc),
                FisherOutput::Score(s) => println!("{s}"),
            }
            Ok(())
        }
        Command::Mc {
            model,
            design,
            reps,
            seed,
        } => {
            let doc = commands::mc_cmd(&model, &design, reps, seed)?;
            print_json(&doc);
            Ok(())
        }
        Command::Loglik { model, data } => {
            let ll = commands::loglik_cmd(&model, &data)?;
            println!("{}", commands::format_significant(ll, 10));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gbn: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
