//! `cosserat` command-line driver.
//!
//! Exit codes: 0 success, 1 domain failure, 2 usage error, 3 I/O error.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use output::CliError;

#[derive(Debug, Parser)]
#[command(name = "cosserat", version, about = "Integrability, reconstruction and energy tools for Cosserat fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Runs the randomized pointwise identity suite.
    CheckIdentities(IdentityArgs),
    /// Refinement study on a manufactured case.
    Convergence(ConvergenceArgs),
    /// Checks whether a stretch field is compatible.
    Compat(CompatArgs),
    /// Rebuilds rotation and deformation from a stretch field.
    Reconstruct(ReconstructArgs),
    /// Minimizes the discrete energy described by a config file.
    Minimize(MinimizeArgs),
    /// Writes the sampled fields of a manufactured case.
    FieldGen(FieldGenArgs),
}

#[derive(Debug, Args)]
pub struct IdentityArgs {
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Mutation-test hook: breaks one sign of the Nye map.
    #[arg(long, hide = true)]
    pub corrupt_nye: bool,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    #[arg(long)]
    pub case: String,
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    /// Nodes per axis on the coarsest level.
    #[arg(long, default_value_t = cosserat::convergence::DEFAULT_BASE_NODES)]
    pub nodes: usize,
    /// Report path; a `.csv` extension selects CSV, anything else JSON.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompatArgs {
    /// Stretch field file (`mat3` or `rot3`).
    #[arg(long)]
    pub input: PathBuf,
    /// Residual tolerance; grid-dependent default when omitted.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Directory receiving `phi.json`, `rotation.json` and `report.json`.
    #[arg(long)]
    pub output: PathBuf,
    /// Base node `i,j,k` where `R = id` and `phi = x`.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0usize, 0, 0])]
    pub base_node: Vec<usize>,
    /// Fails with exit code 1 when the compatibility check does not pass.
    #[arg(long)]
    pub require_compatible: bool,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MinimizeArgs {
    /// Parameters JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Directory receiving `phi.json`, `rotation.json` and `report.json`.
    #[arg(long)]
    pub output: PathBuf,
    /// Seeds the initial perturbation.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FieldGenArgs {
    #[arg(long)]
    pub case: String,
    #[arg(long, default_value_t = 17)]
    pub nodes: usize,
    /// Directory receiving `phi.json`, `rotation.json` and `stretch.json`.
    #[arg(long)]
    pub output: PathBuf,
    /// Adds a non-gradient perturbation of this amplitude to the stretch.
    #[arg(long)]
    pub incompatible: Option<f64>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::CheckIdentities(a) => commands::check_identities(&a),
        Command::Convergence(a) => commands::convergence(&a),
        Command::Compat(a) => commands::compat(&a),
        Command::Reconstruct(a) => commands::reconstruct(&a),
        Command::Minimize(a) => commands::minimize(&a),
        Command::FieldGen(a) => commands::field_gen(&a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
