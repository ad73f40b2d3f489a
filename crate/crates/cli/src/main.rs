//! Command-line front end for crossover-trial treatment-regime estimation:
//! simulation sweeps, trial-file analysis, and carryover diagnostics.
//!
//! Exit codes: 0 success, 2 input/validation, 3 I/O, 4 numeric failure.
//! Failures print a machine-readable JSON object to stderr.

mod analyze;
mod common;
mod csv_io;
mod error;
mod simulate;
mod ttest;

use clap::error::ErrorKind as ClapErrorKind;
use clap::Parser;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "crossgowl",
    version,
    about = "Individualized treatment regimes from 2x2 crossover trials"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Subcommand)]
enum Command {
    /// Run a simulated benchmark sweep; writes results.csv and summary.json
    Simulate(simulate::SimulateArgs),
    /// Cross-validated value comparison of regimes fit to a trial CSV
    Analyze(analyze::AnalyzeArgs),
    /// Carryover t-tests for a trial CSV
    Ttest(ttest::TtestArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                ClapErrorKind::DisplayHelp
                    | ClapErrorKind::DisplayVersion
                    | ClapErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) =>
        {
            // --help / --version: print and exit 0.
            e.exit()
        }
        Err(e) => {
            let err = CliError::input("invalid command line")
                .with_details(vec![e.render().to_string()]);
            eprintln!("{}", err.to_json());
            std::process::exit(err.exit_code());
        }
    };

    let result = match &cli.command {
        Command::Simulate(args) => simulate::run(args),
        Command::Analyze(args) => analyze::run(args),
        Command::Ttest(args) => ttest::run(args),
    };
    if let Err(err) = result {
        eprintln!("{}", err.to_json());
        std::process::exit(err.exit_code());
    }
}
