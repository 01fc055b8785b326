//! `depmeter` command-line front end.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{RunArgs, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "depmeter", version, about = "Causal dependence estimation, structure learning and simulation")]
struct Cli {
    #[command(flatten)]
    run: RunArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ClampKind {
    Natural,
    NonNatural,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Query {
    Cmi,
    Flow,
    Coefficient,
    DoCoefficient,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum XorArg {
    A,
    B,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample a built-in model to CSV.
    Simulate {
        /// linear-sem, nonlinear-eq12, group or ratio.
        model: String,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Clamp X3 of the nonlinear system to 1 (natural) or √2 (non-natural).
        #[arg(long = "do-x3", value_enum)]
        do_x3: Option<ClampKind>,
        /// Extra clamps `NODE=VALUE` (1-based node or column name) for the nonlinear system.
        #[arg(long = "do", value_name = "NODE=VALUE")]
        clamps: Vec<String>,
        /// Share of female rows in the group model.
        #[arg(long, default_value_t = 0.5)]
        split: f64,
        /// Number of strata in the ratio model.
        #[arg(long, default_value_t = 3)]
        m: usize,
        /// Comma-separated stratum probabilities for the ratio model (default uniform).
        #[arg(long, value_delimiter = ',')]
        p: Option<Vec<f64>>,
        /// JSON file `{"a": [[...]], "noise_var": [...]}` for linear-sem.
        #[arg(long)]
        sem: Option<PathBuf>,
        /// Output file name inside the output directory.
        #[arg(long)]
        file: Option<String>,
    },
    /// Estimate the coefficient of X_j on X_i given X_K.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        /// Target column (name or 0-based index).
        #[arg(long)]
        i: String,
        /// Source column.
        #[arg(long)]
        j: String,
        /// Conditioning columns, comma separated.
        #[arg(long, value_delimiter = ',')]
        k: Vec<String>,
    },
    /// Rank the strata of C by the coefficient of X on Y, with per-stratum Gaussian CMI.
    GroupScan {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        y: String,
        #[arg(long)]
        x: String,
        #[arg(long)]
        c: String,
        /// Also evaluate on the first N rows for each listed N (plot-ready CSV).
        #[arg(long, value_delimiter = ',')]
        sweep: Vec<usize>,
    },
    /// Learn a (partially) directed graph from observational and interventional CSVs.
    Learn {
        #[arg(long)]
        input: PathBuf,
        /// Interventional CSVs; each must carry exactly one clamp in its header.
        #[arg(long)]
        interventional: Vec<PathBuf>,
    },
    /// Exact queries on a discrete model.
    Discrete {
        /// Model JSON file.
        #[arg(long, conflicts_with = "xor")]
        model: Option<PathBuf>,
        /// Use the built-in XOR network instead of a model file.
        #[arg(long, value_enum)]
        xor: Option<XorArg>,
        #[arg(long = "xor-b", default_value_t = 0.5)]
        xor_b: f64,
        #[arg(long = "xor-eps", default_value_t = 0.0)]
        xor_eps: f64,
        #[arg(long, value_enum)]
        query: Query,
        /// Source node(s), comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        from: Vec<String>,
        /// Target node(s).
        #[arg(long, value_delimiter = ',', required = true)]
        to: Vec<String>,
        /// Conditioning (or, for flow, imposed) nodes.
        #[arg(long, value_delimiter = ',')]
        given: Vec<String>,
    },
    /// Distances between the empirical laws of two CSV columns.
    Transport {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = RunConfig::from_env(&cli.run).and_then(|cfg| commands::run(&cli.command, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.code());
            ExitCode::FAILURE
        }
    }
}
