//! `simulate`: run a replicated experiment sweep and write the plot-ready
//! result table plus a summary of per-cell means and standard errors.

use std::path::PathBuf;

use crossgowl_core::simulation::{run_replication, Metric, ResultRow, ScenarioSpec, SimConfig};
use crossgowl_core::Method;
use serde::{Deserialize, Serialize};

use crate::common::{parse_methods, worker_count, ALL_METHODS, DEFAULT_SEED};
use crate::csv_io::write_result_rows;
use crate::error::{io_err, CliError};

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    /// JSON config file; flags override its fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scenario id (1-4)
    #[arg(long)]
    pub scenario: Option<u8>,
    /// Comma-separated training sizes
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Replications per training size
    #[arg(long)]
    pub reps: Option<u32>,
    /// Test-set size per replication
    #[arg(long)]
    pub ntest: Option<usize>,
    /// Comma-separated methods (crossover_gowl, parallel_owl, parallel_gowl, ridge)
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Master seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for results.csv and summary.json
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Full benchmark protocol: 1000 replications, 10000-point test sets
    #[arg(long = "paper-scale")]
    pub paper_scale: bool,
}

/// The JSON config schema. Unknown fields are rejected with their names.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    scenario: Option<u8>,
    n: Option<Vec<usize>>,
    reps: Option<u32>,
    n_test: Option<usize>,
    methods: Option<Vec<String>>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

/// Config echo recorded in the summary (resolved values, post-override).
#[derive(Debug, Serialize)]
struct ConfigEcho {
    scenario: u8,
    covariates: usize,
    n: Vec<usize>,
    reps: u32,
    n_test: usize,
    methods: Vec<&'static str>,
    seed: u64,
    paper_scale: bool,
}

/// One summary cell: a (method, n, metric) aggregate over replications.
#[derive(Debug, Serialize)]
struct Cell {
    method: &'static str,
    n_train: usize,
    metric: &'static str,
    /// Mean over converged replications; null when none converged.
    mean: Option<f64>,
    /// Standard error of that mean (sample sd / sqrt(count)).
    stderr: Option<f64>,
    converged: usize,
    failed: usize,
}

#[derive(Debug, Serialize)]
struct Summary {
    config: ConfigEcho,
    cells: Vec<Cell>,
}

pub fn run(args: &SimulateArgs) -> Result<(), CliError> {
    let file: FileConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_err(path, &e))?;
            serde_json::from_str(&text).map_err(|e| {
                CliError::input(format!("malformed config {}", path.display()))
                    .with_details(vec![e.to_string()])
            })?
        }
        None => FileConfig::default(),
    };

    let scenario_id = args
        .scenario
        .or(file.scenario)
        .ok_or_else(|| CliError::input("missing field 'scenario' (config or --scenario)"))?;
    let scenario = ScenarioSpec::new(scenario_id)
        .map_err(|e| CliError::input(e.to_string()))?;

    let paper = SimConfig::paper_scale(scenario, 0);
    let desk = SimConfig::desk_scale(scenario, 0);
    let n_train = args.n.clone().or(file.n).unwrap_or_else(|| {
        if args.paper_scale {
            paper.n_train.clone()
        } else {
            desk.n_train.clone()
        }
    });
    let replications = if args.paper_scale {
        paper.replications
    } else {
        args.reps.or(file.reps).unwrap_or(desk.replications)
    };
    let n_test = if args.paper_scale {
        paper.n_test
    } else {
        args.ntest.or(file.n_test).unwrap_or(desk.n_test)
    };
    let methods = match args.methods.clone().or(file.methods) {
        Some(names) => parse_methods(&names)?,
        None => ALL_METHODS.to_vec(),
    };
    let master_seed = args.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    let out_dir = args
        .out
        .clone()
        .or(file.out)
        .unwrap_or_else(|| PathBuf::from("."));

    let config = SimConfig {
        scenario,
        n_train,
        n_test,
        replications,
        methods,
        master_seed,
    };
    config.validate().map_err(|e| CliError::input(e.to_string()))?;

    let rows = run_sweep(&config)?;

    std::fs::create_dir_all(&out_dir).map_err(|e| io_err(&out_dir, &e))?;
    let csv_path = out_dir.join("results.csv");
    let mut csv_bytes = Vec::new();
    write_result_rows(&rows, &mut csv_bytes).expect("in-memory write cannot fail");
    std::fs::write(&csv_path, &csv_bytes).map_err(|e| io_err(&csv_path, &e))?;

    let summary = Summary {
        config: ConfigEcho {
            scenario: scenario.id(),
            covariates: scenario.p(),
            n: config.n_train.clone(),
            reps: config.replications,
            n_test: config.n_test,
            methods: config.methods.iter().map(|m| m.name()).collect(),
            seed: config.master_seed,
            paper_scale: args.paper_scale,
        },
        cells: summarize(&config, &rows),
    };
    let json_path = out_dir.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).expect("summary serialization");
    std::fs::write(&json_path, json).map_err(|e| io_err(&json_path, &e))?;

    println!(
        "wrote {} rows to {} and {}",
        rows.len(),
        csv_path.display(),
        json_path.display()
    );
    Ok(())
}

/// Run every (n, replication) task on a deterministic worker pool. Results
/// land in slots indexed by task order, so the output is identical to the
/// sequential sweep regardless of scheduling.
fn run_sweep(config: &SimConfig) -> Result<Vec<ResultRow>, CliError> {
    let workers = worker_count()?;
    let tasks: Vec<(usize, u32)> = config
        .n_train
        .iter()
        .flat_map(|&n| (0..config.replications).map(move |rep| (n, rep)))
        .collect();

    let mut slots: Vec<Vec<ResultRow>> = vec![Vec::new(); tasks.len()];
    if workers <= 1 || tasks.len() <= 1 {
        for (slot, &(n, rep)) in slots.iter_mut().zip(&tasks) {
            *slot = run_replication(config, n, rep);
        }
    } else {
        let results = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers.min(tasks.len()))
                .map(|w| {
                    let tasks = &tasks;
                    scope.spawn(move || {
                        tasks
                            .iter()
                            .enumerate()
                            .skip(w)
                            .step_by(workers)
                            .map(|(i, &(n, rep))| (i, run_replication(config, n, rep)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("worker panicked"))
                .collect::<Vec<_>>()
        });
        for (i, rows) in results {
            slots[i] = rows;
        }
    }
    Ok(slots.into_iter().flatten().collect())
}

/// Metric order for summary cells (derived value-MSE cells come last).
const SUMMARY_METRICS: [Metric; 4] = [
    Metric::Misclassification,
    Metric::EstimatedValue,
    Metric::OptimalValue,
    Metric::CarryoverMse,
];

fn summarize(config: &SimConfig, rows: &[ResultRow]) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &method in &config.methods {
        for &n in &config.n_train {
            for metric in SUMMARY_METRICS {
                let values: Vec<f64> = rows
                    .iter()
                    .filter(|r| {
                        r.method == method && r.n_train == n && r.metric == metric && r.converged
                    })
                    .map(|r| r.value)
                    .collect();
                let failed = rows
                    .iter()
                    .filter(|r| {
                        r.method == method && r.n_train == n && r.metric == metric && !r.converged
                    })
                    .count();
                if values.is_empty() && failed == 0 {
                    continue; // metric not defined for this method/scenario
                }
                cells.push(make_cell(method, n, metric.name(), values, failed));
            }
            // Derived squared error between estimated and optimal value per
            // replication: its mean is the value MSE plotted against n.
            let paired = value_errors(rows, method, n);
            if !paired.0.is_empty() || paired.1 > 0 {
                cells.push(make_cell(method, n, "value_squared_error", paired.0, paired.1));
            }
        }
    }
    cells
}

/// Per-replication (estimated - optimal)^2 values and failure count.
fn value_errors(rows: &[ResultRow], method: Method, n: usize) -> (Vec<f64>, usize) {
    let mut errors = Vec::new();
    let mut failed = 0;
    let pick = |metric: Metric, rep: u32| {
        rows.iter().find(|r| {
            r.method == method && r.n_train == n && r.metric == metric && r.replication == rep
        })
    };
    let reps: Vec<u32> = rows
        .iter()
        .filter(|r| r.method == method && r.n_train == n && r.metric == Metric::EstimatedValue)
        .map(|r| r.replication)
        .collect();
    for rep in reps {
        match (pick(Metric::EstimatedValue, rep), pick(Metric::OptimalValue, rep)) {
            (Some(est), Some(opt)) if est.converged && opt.converged => {
                errors.push((est.value - opt.value) * (est.value - opt.value));
            }
            _ => failed += 1,
        }
    }
    (errors, failed)
}

fn make_cell(
    method: Method,
    n_train: usize,
    metric: &'static str,
    values: Vec<f64>,
    failed: usize,
) -> Cell {
    let count = values.len();
    let (mean, stderr) = if count == 0 {
        (None, None)
    } else {
        let mean = values.iter().sum::<f64>() / count as f64;
        let stderr = if count > 1 {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / (count as f64 - 1.0);
            Some((var / count as f64).sqrt())
        } else {
            None
        };
        (Some(mean), stderr)
    };
    Cell {
        method: method.name(),
        n_train,
        metric,
        mean,
        stderr,
        converged: count,
        failed,
    }
}
