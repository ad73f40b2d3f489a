//! `analyze`: cross-validated value comparison of regime estimators on a
//! crossover trial file, with carryover diagnostics.
//!
//! The crossover method trains on both periods; the parallel baselines train
//! on the period-1 projection of the same training subjects. Every method is
//! scored with the same crossover value estimate: a held-out subject
//! contributes the outcome of the period in which it received the
//! recommended treatment.

use std::path::PathBuf;

use crossgowl_core::carryover::carryover_ttest;
use crossgowl_core::evaluation::{crossover_cv_value, CvValue, CvValueError};
use crossgowl_core::forest::RegressorSpec;
use crossgowl_core::regimes::{
    fit_crossover_gowl, fit_parallel_gowl, fit_parallel_owl, fit_ridge_regime, OwlShift,
    RegimeError,
};
use crossgowl_core::{CarryoverMode, CrossoverDataset, HyperGrid, Method};
use serde::Serialize;

use crate::common::{method_seed, parse_methods, SchemaFlags, ALL_METHODS, DEFAULT_SEED};
use crate::csv_io::load_crossover_csv;
use crate::error::CliError;

pub const CV_FOLDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CarryoverFlag {
    /// Use the raw reward difference (assumes no carryover)
    None,
    /// Estimate the carryover by the two-stage regression inside each fold
    Estimate,
    /// Estimate only when a carryover t-test rejects at the 0.05 level
    TtestGate,
}

impl CarryoverFlag {
    fn name(self) -> &'static str {
        match self {
            CarryoverFlag::None => "none",
            CarryoverFlag::Estimate => "estimate",
            CarryoverFlag::TtestGate => "ttest-gate",
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct AnalyzeArgs {
    /// Crossover trial CSV
    pub input: PathBuf,
    #[command(flatten)]
    pub schema: SchemaFlags,
    /// Comma-separated methods (default: all four)
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Carryover handling for the crossover method
    #[arg(long, value_enum, default_value_t = CarryoverFlag::None)]
    pub carryover: CarryoverFlag,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Write the report here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct TestEcho {
    t: f64,
    df: f64,
    p: f64,
}

#[derive(Debug, Serialize)]
struct TestsEcho {
    treatment_plus: TestEcho,
    treatment_minus: TestEcho,
}

#[derive(Debug, Serialize)]
struct CarryoverEcho {
    requested: &'static str,
    /// What actually ran: under ttest-gate this is the gate's decision.
    applied: &'static str,
}

#[derive(Debug, Serialize)]
struct MethodValue {
    method: &'static str,
    mean_value: f64,
    sd: f64,
    fold_values: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct AnalyzeReport {
    command: &'static str,
    input: String,
    seed: u64,
    n: usize,
    p: usize,
    folds: usize,
    carryover: CarryoverEcho,
    /// Mean period-1 outcome: the value the trial's own randomization
    /// achieved, the benchmark every regime should beat.
    observed_period1_mean: f64,
    carryover_tests: TestsEcho,
    methods: Vec<MethodValue>,
}

pub fn run(args: &AnalyzeArgs) -> Result<(), CliError> {
    let data = load_crossover_csv(&args.input, &args.schema.to_schema())?;
    let methods = match &args.methods {
        Some(names) => parse_methods(names)?,
        None => ALL_METHODS.to_vec(),
    };

    let tests = carryover_ttest(&data).map_err(|e| CliError::input(e.to_string()))?;
    let applied = match args.carryover {
        CarryoverFlag::None => CarryoverFlag::None,
        CarryoverFlag::Estimate => CarryoverFlag::Estimate,
        CarryoverFlag::TtestGate => {
            if tests.treatment_plus.p < 0.05 || tests.treatment_minus.p < 0.05 {
                CarryoverFlag::Estimate
            } else {
                CarryoverFlag::None
            }
        }
    };

    let mut method_values = Vec::new();
    for &method in &methods {
        let cv = method_cv(&data, method, applied, args.seed).map_err(map_cv_error)?;
        method_values.push(MethodValue {
            method: method.name(),
            mean_value: cv.mean,
            sd: cv.sd,
            fold_values: cv.fold_values,
        });
    }

    let observed_period1_mean = data.observations().iter().map(|o| o.y1).sum::<f64>()
        / data.n() as f64;

    let report = AnalyzeReport {
        command: "analyze",
        input: args.input.display().to_string(),
        seed: args.seed,
        n: data.n(),
        p: data.p(),
        folds: CV_FOLDS,
        carryover: CarryoverEcho {
            requested: args.carryover.name(),
            applied: applied.name(),
        },
        observed_period1_mean,
        carryover_tests: TestsEcho {
            treatment_plus: TestEcho {
                t: tests.treatment_plus.t,
                df: tests.treatment_plus.df,
                p: tests.treatment_plus.p,
            },
            treatment_minus: TestEcho {
                t: tests.treatment_minus.t,
                df: tests.treatment_minus.df,
                p: tests.treatment_minus.p,
            },
        },
        methods: method_values,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serialization");
    match &args.out {
        Some(path) => std::fs::write(path, json).map_err(|e| crate::error::io_err(path, &e))?,
        None => println!("{json}"),
    }
    Ok(())
}

/// Cross-validated crossover value of one method. The same outer folds
/// (seeded by the user seed) are reused for every method so the comparison
/// is paired; inner hyperparameter CV gets an independent per-method seed.
fn method_cv(
    data: &CrossoverDataset,
    method: Method,
    applied: CarryoverFlag,
    seed: u64,
) -> Result<CvValue, CvValueError<RegimeError>> {
    let inner = method_seed(seed, method);
    match method {
        Method::CrossoverGowl => crossover_cv_value(
            data,
            |train| {
                let grid = HyperGrid::defaults_for(train.n());
                let mode = match applied {
                    CarryoverFlag::Estimate => {
                        CarryoverMode::Estimate(RegressorSpec::forest_with_seed(
                            inner.wrapping_add(1),
                        ))
                    }
                    _ => CarryoverMode::None,
                };
                let model = fit_crossover_gowl(train, &grid, mode, inner)?;
                Ok(move |x: &[f64]| model.recommend(x).expect("dimensions validated at load"))
            },
            CV_FOLDS,
            seed,
        ),
        Method::ParallelGowl => crossover_cv_value(
            data,
            |train| {
                let period1 = train.period1_parallel();
                let grid = HyperGrid::defaults_for(period1.n());
                let model = fit_parallel_gowl(&period1, &grid, inner)?;
                Ok(move |x: &[f64]| model.recommend(x).expect("dimensions validated at load"))
            },
            CV_FOLDS,
            seed,
        ),
        Method::ParallelOwl => crossover_cv_value(
            data,
            |train| {
                let period1 = train.period1_parallel();
                let grid = HyperGrid::defaults_for(period1.n());
                let model = fit_parallel_owl(&period1, &grid, OwlShift::FoldMin, inner)?;
                Ok(move |x: &[f64]| model.recommend(x).expect("dimensions validated at load"))
            },
            CV_FOLDS,
            seed,
        ),
        Method::Ridge => crossover_cv_value(
            data,
            |train| {
                let period1 = train.period1_parallel();
                let grid = HyperGrid::defaults_for(period1.n());
                let model = fit_ridge_regime(&period1, &grid.lambdas, grid.folds, inner)?;
                Ok(move |x: &[f64]| model.recommend(x).expect("dimensions validated at load"))
            },
            CV_FOLDS,
            seed,
        ),
    }
}

fn map_cv_error(err: CvValueError<RegimeError>) -> CliError {
    match err {
        CvValueError::Split(e) => CliError::input(format!("cross-validation split: {e}")),
        CvValueError::Fit { fold, source } => match source {
            RegimeError::PoorAllocation { fold: inner } => CliError::numeric(format!(
                "cross-validation for the weighted SVM failed on outer fold {fold}: the class \
                 labels sign(R)*A1 are poorly allocated (inner training fold {inner} contains \
                 a single label sign); more subjects or fewer folds are needed"
            )),
            RegimeError::DegenerateReward => CliError::numeric(format!(
                "outer fold {fold}: every reward is zero, so no regime can be ranked"
            )),
            other => CliError::numeric(format!("outer fold {fold}: {other}")),
        },
    }
}
