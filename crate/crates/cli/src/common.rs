//! Shared flag parsing helpers.

use crossgowl_core::Method;

use crate::csv_io::CrossoverSchema;
use crate::error::CliError;

/// Column-name flags shared by the commands that read trial CSVs.
#[derive(Debug, Clone, clap::Args)]
pub struct SchemaFlags {
    /// Comma-separated covariate columns (default: every unclaimed column, in header order)
    #[arg(long = "schema.x-cols", value_delimiter = ',')]
    pub x_cols: Option<Vec<String>>,
    /// Period-1 treatment column (values -1 or 1)
    #[arg(long = "schema.a1-col", default_value = "a1")]
    pub a1_col: String,
    /// Period-1 outcome column
    #[arg(long = "schema.y1-col", default_value = "y1")]
    pub y1_col: String,
    /// Period-2 outcome column
    #[arg(long = "schema.y2-col", default_value = "y2")]
    pub y2_col: String,
}

impl SchemaFlags {
    pub fn to_schema(&self) -> CrossoverSchema {
        CrossoverSchema {
            x_cols: self.x_cols.clone(),
            a1_col: self.a1_col.clone(),
            y1_col: self.y1_col.clone(),
            y2_col: self.y2_col.clone(),
        }
    }
}

pub const DEFAULT_SEED: u64 = 17;

pub const ALL_METHODS: [Method; 4] = [
    Method::CrossoverGowl,
    Method::ParallelOwl,
    Method::ParallelGowl,
    Method::Ridge,
];

/// Parse method names as written in result tables (`crossover_gowl`), with
/// hyphenated spellings accepted as aliases.
pub fn parse_methods(names: &[String]) -> Result<Vec<Method>, CliError> {
    names
        .iter()
        .map(|raw| {
            let name = raw.replace('-', "_");
            ALL_METHODS
                .into_iter()
                .find(|m| m.name() == name)
                .ok_or_else(|| {
                    CliError::input(format!("unknown method '{raw}'")).with_details(vec![format!(
                        "valid methods: {}",
                        ALL_METHODS.map(Method::name).join(", ")
                    )])
                })
        })
        .collect()
}

/// Stable per-method index used to derive independent sub-seeds.
pub fn method_id(method: Method) -> u64 {
    match method {
        Method::CrossoverGowl => 0,
        Method::ParallelGowl => 1,
        Method::ParallelOwl => 2,
        Method::Ridge => 3,
    }
}

/// Derive a deterministic per-method seed from the user-facing seed.
pub fn method_seed(seed: u64, method: Method) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(method_id(method) + 1)
}

/// Worker count: `ITR_THREADS` when set (must be a positive integer),
/// otherwise the machine's available parallelism.
pub fn worker_count() -> Result<usize, CliError> {
    match std::env::var("ITR_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t >= 1 => Ok(t),
            _ => Err(CliError::input(format!(
                "ITR_THREADS must be a positive integer (got '{v}')"
            ))),
        },
        Err(std::env::VarError::NotPresent) => Ok(std::thread::available_parallelism()
            .map(usize::from)
            .unwrap_or(1)),
        Err(e) => Err(CliError::input(format!("ITR_THREADS: {e}"))),
    }
}
