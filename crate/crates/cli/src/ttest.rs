//! `ttest`: carryover diagnostics for a crossover trial file, one Welch
//! two-sample test per first-period treatment arm.

use std::path::PathBuf;

use crossgowl_core::carryover::carryover_ttest;
use serde::Serialize;

use crate::common::{SchemaFlags, DEFAULT_SEED};
use crate::csv_io::load_crossover_csv;
use crate::error::CliError;

#[derive(Debug, clap::Args)]
pub struct TtestArgs {
    /// Crossover trial CSV
    pub input: PathBuf,
    #[command(flatten)]
    pub schema: SchemaFlags,
    /// Echoed in the report (the tests themselves use no randomness)
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Write the report here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct TestLine {
    hypothesis: &'static str,
    t: f64,
    df: f64,
    p: f64,
}

#[derive(Debug, Serialize)]
struct TtestReport {
    command: &'static str,
    input: String,
    seed: u64,
    n: usize,
    p: usize,
    tests: Vec<TestLine>,
}

pub fn run(args: &TtestArgs) -> Result<(), CliError> {
    let data = load_crossover_csv(&args.input, &args.schema.to_schema())?;
    let tests = carryover_ttest(&data).map_err(|e| CliError::input(e.to_string()))?;

    let report = TtestReport {
        command: "ttest",
        input: args.input.display().to_string(),
        seed: args.seed,
        n: data.n(),
        p: data.p(),
        tests: vec![
            TestLine {
                hypothesis: "mean carryover of treatment +1 is zero",
                t: tests.treatment_plus.t,
                df: tests.treatment_plus.df,
                p: tests.treatment_plus.p,
            },
            TestLine {
                hypothesis: "mean carryover of treatment -1 is zero",
                t: tests.treatment_minus.t,
                df: tests.treatment_minus.df,
                p: tests.treatment_minus.p,
            },
        ],
    };
    let json = serde_json::to_string_pretty(&report).expect("report serialization");
    match &args.out {
        Some(path) => std::fs::write(path, json).map_err(|e| crate::error::io_err(path, &e))?,
        None => println!("{json}"),
    }
    Ok(())
}
