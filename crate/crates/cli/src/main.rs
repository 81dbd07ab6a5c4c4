//! `svmma` command-line tool.
//!
//! Exit codes: 0 on success, 2 when a simulation excluded failed
//! replications, 1 on any error (including bad arguments).

// `!(x > 0.0)` is used on purpose so that NaN fails the check too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

mod args;
mod bandwidth;
mod fit;
mod manifest;
mod predict;
mod simulate;

#[derive(Debug, Parser)]
#[command(
    name = "svmma",
    version,
    about = "Spatially varying coefficient model averaging"
)]
struct Cli {
    /// Worker threads; defaults to the number of CPUs. Outputs do not
    /// depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a Monte-Carlo design and write risk tables.
    Simulate(simulate::SimulateArgs),
    /// Fit every candidate on a dataset and report averaging weights.
    Fit(fit::FitArgs),
    /// Out-of-sample prediction error over train/test splits.
    Predict(predict::PredictArgs),
    /// Leave-one-out CV curves per candidate.
    Bandwidth(bandwidth::BandwidthArgs),
}

fn run(cli: Cli) -> Result<u8> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool.build()?;
    pool.install(|| match &cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Fit(a) => fit::run(a),
        Command::Predict(a) => predict::run(a),
        Command::Bandwidth(a) => bandwidth::run(a),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
