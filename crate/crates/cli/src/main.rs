//! `auspex` — batch front end for the case-forecasting and anomaly
//! detection pipeline.
//!
//! Subcommands mirror the analysis stages: `correlate` screens lagged
//! covariates, `predict` fits per-city models and writes predictions,
//! `detect` cross-references significant prediction errors with
//! spectral anomalies, `normalize` low-pass filters the cross-city case
//! signal, and `decompose` exports one city's IMF decomposition.
//!
//! Every command reads one dataset manifest, writes plain CSV or
//! gnuplot-ready artifacts into `--out`, and is deterministic: equal
//! inputs and seeds produce byte-identical files. Per-city failures
//! never abort the whole run; they are reported on stderr and reflected
//! in a non-zero exit code.

mod commands;
mod context;

use clap::{Args, Parser, Subcommand};
use context::{CommonArgs, Context};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "auspex", version, about = "Case forecasting and cross-city anomaly detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank-correlate lagged covariates with cases, city by city.
    Correlate(CommonArgs),
    /// Fit per-city models and write predictions plus a summary table.
    Predict(PredictArgs),
    /// Match significant prediction errors against detected anomalies.
    Detect(DetectArgs),
    /// Low-pass filter the cross-city case signal into a new cases CSV.
    Normalize(CommonArgs),
    /// Decompose one city's cases into IMFs and a residual.
    Decompose(DecomposeArgs),
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Forecasting method.
    #[arg(long, value_enum, default_value_t)]
    method: context::Method,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Directory holding `predictions_<city>.csv` files (defaults to --out).
    #[arg(long)]
    predictions: Option<PathBuf>,
}

#[derive(Args)]
struct DecomposeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// City id to decompose.
    city: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Correlate(common) => Context::build(common).and_then(|c| commands::correlate::run(&c)),
        Command::Predict(args) => {
            Context::build(&args.common).and_then(|c| commands::predict::run(&c, args.method))
        }
        Command::Detect(args) => Context::build(&args.common).and_then(|c| {
            let dir = args.predictions.clone().unwrap_or_else(|| c.out.clone());
            commands::detect::run(&c, &dir)
        }),
        Command::Normalize(common) => Context::build(common).and_then(|c| commands::normalize::run(&c)),
        Command::Decompose(args) => {
            Context::build(&args.common).and_then(|c| commands::decompose::run(&c, &args.city))
        }
    };
    match outcome {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failures) => {
            eprintln!("error: {failures} per-city failure(s); see messages above");
            ExitCode::FAILURE
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
