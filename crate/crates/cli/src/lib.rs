//! Command-line front end: CSV ingestion, JSON-configurable subcommands and
//! report emission (JSON metadata plus CSV payloads).

pub mod commands;
pub mod config;
pub mod data;
mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use error::CliError;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "dcm", version, about = "Depth-based rank covariance matrices and robust PCA")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a scatter estimator, emit eigen tables, unexplained variance and diagnostics.
    Pca(commands::pca::PcaArgs),
    /// Per-row depth, htped and multivariate rank.
    Depth(commands::depth::DepthArgs),
    /// Finite-sample efficiency simulation (MSPA/FSE tables).
    SimulateFse(commands::fse::FseArgs),
    /// Asymptotic relative efficiencies of first eigenvectors.
    Are(commands::are::AreArgs),
    /// Influence-function norms on a bivariate grid.
    InfluenceGrid(commands::influence::InfluenceArgs),
    /// Score/orthogonal distances and outlier flags for a stored PCA model.
    Diagnose(commands::diagnose::DiagnoseArgs),
}

/// Output directory and file names written by a command.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub output_dir: PathBuf,
    pub files: Vec<String>,
}

pub fn run(cli: Cli) -> CliResult<Outcome> {
    match cli.command {
        Command::Pca(a) => commands::pca::run(a),
        Command::Depth(a) => commands::depth::run(a),
        Command::SimulateFse(a) => commands::fse::run(a),
        Command::Are(a) => commands::are::run(a),
        Command::InfluenceGrid(a) => commands::influence::run(a),
        Command::Diagnose(a) => commands::diagnose::run(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
/// Errors are printed to stderr as a single `error[CODE]: message` line.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("error[{}]: {}", CliError::VALIDATION, first);
            return 2;
        }
    };
    match run(cli) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error[{}]: {}", e.code(), e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}
