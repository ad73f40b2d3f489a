//! Benchmark scenario generators and the replicated experiment driver.
//!
//! Four built-in data-generating scenarios share the mean function
//! `mu(x) = 1 + x1 + 2 x2 + 0.5 x3 + x4` and differ in the interaction
//! `c(x)` and the carryover effect `delta_a(x)`:
//!
//! | scenario | c(x)                  | delta_-1          | delta_+1        |
//! |----------|-----------------------|-------------------|-----------------|
//! | 1        | 1.12 (0.3 - x1 - x2)  | 0                 | 0               |
//! | 2        | 1.15 (x1 - 1.25 x2^2) | 0                 | 0               |
//! | 3        | 1.12 (0.3 - x1 - x2)  | |mu + c| / 4      | |mu - c| / 2    |
//! | 4        | 1.15 (x1 - 1.25 x2^2) | 0.4 x1^2 + 0.3 x2 | 1 - 2 x1 - x2^2 |
//!
//! Covariates are i.i.d. uniform on `(-1, 1)`. Crossover responses follow
//! `Y_k = mu + A_k c + delta_{A1} 1{k=2} + e_k` with unit-variance noise of
//! covariance 0.5 between periods; parallel responses are
//! `Y = mu + A c + e` with unit variance. Treatments are `+-1` with equal
//! probability, so every propensity is exactly 0.5.
//!
//! [`run_experiment`] replays the benchmark protocol: per `(scenario, n,
//! replication)` it generates crossover and parallel training sets plus a
//! period-1-only test set, fits each configured method, and emits one row
//! per metric. All randomness comes from substreams addressed by
//! `(scenario, purpose, n, replication)` and keyed to stable method ids,
//! so the result table is a pure function of the config — method list
//! order, scheduling, or running a single replication in isolation cannot
//! change any number.

use crate::carryover::CarryoverEffect;
use crate::data::{
    CrossoverDataset, CrossoverObservation, ParallelDataset, ParallelObservation, Treatment,
};
use crate::evaluation::{estimated_value, misclassification_rate};
use crate::forest::RegressorSpec;
use crate::linalg::Matrix;
use crate::regimes::{
    fit_crossover_gowl, fit_parallel_gowl, fit_parallel_owl, fit_ridge_regime, CarryoverMode,
    HyperGrid, Method, OwlShift, RegimeModel,
};
use crate::rng::{pack_stream, substream, standard_normal, uniform_open_pm1};
use crate::wsvm::sign_plus;
use alloc::vec::Vec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// `sqrt(3)/2`: the off-diagonal Cholesky completion of the period-noise
/// covariance `[[1, 0.5], [0.5, 1]]`, so `e1 = z1`,
/// `e2 = 0.5 z1 + sqrt(3)/2 z2`.
const NOISE_CHOL: f64 = 0.866_025_403_784_438_6;

/// Any generated outcome this large means the generator itself is broken
/// (under the model, `|Y| > 50` has astronomically small probability).
const OUTCOME_TRIPWIRE: f64 = 50.0;

/// One of the four built-in data-generating scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScenarioSpec {
    id: u8,
    p: usize,
}

/// Errors from scenario and config validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimError {
    /// Scenario ids run 1..=4.
    UnknownScenario { id: u8 },
    /// The mean function reads x1..x4, so at least 4 covariates are needed.
    BadCovariateCount { p: usize },
    /// A config field is out of range.
    BadConfig { reason: &'static str },
}

impl core::fmt::Display for SimError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SimError::UnknownScenario { id } => write!(f, "unknown scenario id {id} (1..=4)"),
            SimError::BadCovariateCount { p } => {
                write!(f, "need at least 4 covariates, got {p}")
            }
            SimError::BadConfig { reason } => write!(f, "bad experiment config: {reason}"),
        }
    }
}

impl core::error::Error for SimError {}

impl ScenarioSpec {
    /// Scenario `id` with the default 50 covariates.
    pub fn new(id: u8) -> Result<Self, SimError> {
        Self::with_p(id, 50)
    }

    /// Scenario `id` with `p` covariates (`p >= 4`; only x1..x4 enter the
    /// closed forms, the rest are noise dimensions).
    pub fn with_p(id: u8, p: usize) -> Result<Self, SimError> {
        if !(1..=4).contains(&id) {
            return Err(SimError::UnknownScenario { id });
        }
        if p < 4 {
            return Err(SimError::BadCovariateCount { p });
        }
        Ok(ScenarioSpec { id, p })
    }

    pub fn id(self) -> u8 {
        self.id
    }

    pub fn p(self) -> usize {
        self.p
    }

    /// Whether the scenario generates a nonzero carryover effect.
    pub fn has_carryover(self) -> bool {
        self.id == 3 || self.id == 4
    }

    /// Mean function `mu(x) = 1 + x1 + 2 x2 + 0.5 x3 + x4`.
    pub fn mu(self, x: &[f64]) -> f64 {
        1.0 + x[0] + 2.0 * x[1] + 0.5 * x[2] + x[3]
    }

    /// Interaction `c(x)`; its sign is the optimal rule.
    pub fn c(self, x: &[f64]) -> f64 {
        match self.id {
            1 | 3 => 1.12 * (0.3 - x[0] - x[1]),
            _ => 1.15 * (x[0] - 1.25 * x[1] * x[1]),
        }
    }

    /// Carryover effect `delta_a(x)`.
    pub fn delta(self, x: &[f64], a1: Treatment) -> f64 {
        match (self.id, a1) {
            (3, Treatment::Minus) => ((self.mu(x) + self.c(x)) / 4.0).abs(),
            (3, Treatment::Plus) => ((self.mu(x) - self.c(x)) / 2.0).abs(),
            (4, Treatment::Minus) => 0.4 * x[0] * x[0] + 0.3 * x[1],
            (4, Treatment::Plus) => 1.0 - 2.0 * x[0] - x[1] * x[1],
            _ => 0.0,
        }
    }

    /// The true optimal rule `D0(x) = sign(c(x))`, ties to `+1`.
    pub fn optimal_rule(self, x: &[f64]) -> Treatment {
        Treatment::from_sign(sign_plus(self.c(x)))
    }
}

impl CarryoverEffect for ScenarioSpec {
    fn delta(&self, x: &[f64], a1: Treatment) -> f64 {
        ScenarioSpec::delta(*self, x, a1)
    }

    fn dim(&self) -> Option<usize> {
        Some(self.p)
    }
}

/// Full experiment description; [`run_experiment`]'s only input.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scenario: ScenarioSpec,
    /// Training sizes to sweep.
    pub n_train: Vec<usize>,
    /// Period-1-only test set size per replication.
    pub n_test: usize,
    pub replications: u32,
    pub methods: Vec<Method>,
    pub master_seed: u64,
}

impl SimConfig {
    /// The benchmark protocol at full scale: n in {30, 75, 150, 300, 600},
    /// 1,000 replications, test sets of 10,000.
    pub fn paper_scale(scenario: ScenarioSpec, master_seed: u64) -> Self {
        SimConfig {
            scenario,
            n_train: alloc::vec![30, 75, 150, 300, 600],
            n_test: 10_000,
            replications: 1000,
            methods: alloc::vec![
                Method::CrossoverGowl,
                Method::ParallelOwl,
                Method::ParallelGowl,
                Method::Ridge,
            ],
            master_seed,
        }
    }

    /// Desk-scale defaults: 100 replications and test sets of 2,000, same
    /// sizes and methods. Figure-level claims are asserted as orderings at
    /// this scale.
    pub fn desk_scale(scenario: ScenarioSpec, master_seed: u64) -> Self {
        SimConfig {
            n_test: 2_000,
            replications: 100,
            ..Self::paper_scale(scenario, master_seed)
        }
    }

    /// Check the configuration before a sweep. `run_experiment` calls this
    /// itself; callers that drive `run_replication` directly (for example a
    /// worker pool) should call it once up front.
    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_train.is_empty() {
            return Err(SimError::BadConfig {
                reason: "n_train list is empty",
            });
        }
        if self.n_train.iter().any(|n| *n == 0) {
            return Err(SimError::BadConfig {
                reason: "training sizes must be >= 1",
            });
        }
        if self.n_train.iter().any(|n| *n > u16::MAX as usize) {
            return Err(SimError::BadConfig {
                reason: "training sizes above 65535 are not addressable",
            });
        }
        if self.n_test == 0 {
            return Err(SimError::BadConfig {
                reason: "n_test must be >= 1",
            });
        }
        if self.replications == 0 {
            return Err(SimError::BadConfig {
                reason: "replications must be >= 1",
            });
        }
        if self.methods.is_empty() {
            return Err(SimError::BadConfig {
                reason: "method list is empty",
            });
        }
        Ok(())
    }
}

/// What a result row measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Fraction of the test set where the fitted rule disagrees with `D0`.
    Misclassification,
    /// Inverse-propensity value of the fitted rule on the test set.
    EstimatedValue,
    /// Inverse-propensity value of `D0` on the same test set.
    OptimalValue,
    /// Test-set MSE of the estimated carryover versus the truth
    /// (scenarios 3-4, crossover method only).
    CarryoverMse,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Misclassification => "misclassification",
            Metric::EstimatedValue => "estimated_value",
            Metric::OptimalValue => "optimal_value",
            Metric::CarryoverMse => "carryover_mse",
        }
    }
}

/// One experiment measurement. A failed fit or undefined metric is flagged
/// with `value = NaN` and `converged = false` rather than aborting the
/// sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario: u8,
    pub n_train: usize,
    pub replication: u32,
    pub method: Method,
    pub metric: Metric,
    pub value: f64,
    pub converged: bool,
    /// The master seed, echoed so any row can be reproduced from the
    /// config alone.
    pub seed: u64,
}

// Stream purposes. Data streams are shared by all methods; per-method
// streams are keyed by a stable method id so the configured method list
// order cannot matter.
const PURPOSE_CROSSOVER_TRAIN: u8 = 1;
const PURPOSE_PARALLEL_TRAIN: u8 = 2;
const PURPOSE_TEST: u8 = 3;
const PURPOSE_FOREST: u8 = 5;
const PURPOSE_CV_BASE: u8 = 16;

fn method_stable_id(method: Method) -> u8 {
    match method {
        Method::CrossoverGowl => 0,
        Method::ParallelGowl => 1,
        Method::ParallelOwl => 2,
        Method::Ridge => 3,
    }
}

/// `n x p` matrix of i.i.d. uniforms on `(-1, 1)` from the supplied stream.
pub fn gen_covariates(n: usize, p: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut m = Matrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            m.set(i, j, uniform_open_pm1(rng));
        }
    }
    m
}

fn draw_treatment(rng: &mut ChaCha8Rng) -> Treatment {
    if rng.gen::<bool>() {
        Treatment::Plus
    } else {
        Treatment::Minus
    }
}

fn tripwire(y: f64) {
    debug_assert!(
        y.abs() <= OUTCOME_TRIPWIRE,
        "generator tripwire: outcome {y} is outside +-{OUTCOME_TRIPWIRE}"
    );
}

/// Generate a crossover trial: sequence `(a1, -a1)` equiprobable,
/// correlated period noise, propensity exactly 0.5.
pub fn gen_crossover_dataset(
    spec: &ScenarioSpec,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> CrossoverDataset {
    let mut obs = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..spec.p).map(|_| uniform_open_pm1(rng)).collect();
        let a1 = draw_treatment(rng);
        let z1 = standard_normal(rng);
        let z2 = standard_normal(rng);
        let e1 = z1;
        let e2 = 0.5 * z1 + NOISE_CHOL * z2;
        let mu = spec.mu(&x);
        let c = spec.c(&x);
        let delta = ScenarioSpec::delta(*spec, &x, a1);
        let y1 = mu + a1.as_f64() * c + e1;
        let y2 = mu - a1.as_f64() * c + delta + e2;
        tripwire(y1);
        tripwire(y2);
        obs.push(CrossoverObservation {
            x,
            a1,
            y1,
            y2,
            propensity: 0.5,
        });
    }
    CrossoverDataset::new(obs).expect("generated data is valid by construction")
}

/// Generate a parallel trial (equivalently: period-1-only crossover data):
/// `Y = mu + A c + e`, unit noise, propensity exactly 0.5.
pub fn gen_parallel_dataset(
    spec: &ScenarioSpec,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> ParallelDataset {
    let mut obs = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..spec.p).map(|_| uniform_open_pm1(rng)).collect();
        let a = draw_treatment(rng);
        let e = standard_normal(rng);
        let y = spec.mu(&x) + a.as_f64() * spec.c(&x) + e;
        tripwire(y);
        obs.push(ParallelObservation {
            x,
            a,
            y,
            propensity: 0.5,
        });
    }
    ParallelDataset::new(obs).expect("generated data is valid by construction")
}

/// The metrics a `(scenario, method)` pair emits.
fn metrics_for(spec: &ScenarioSpec, method: Method) -> Vec<Metric> {
    let mut ms = alloc::vec![
        Metric::Misclassification,
        Metric::EstimatedValue,
        Metric::OptimalValue,
    ];
    if spec.has_carryover() && method == Method::CrossoverGowl {
        ms.push(Metric::CarryoverMse);
    }
    ms
}

/// Run one replication: generate the three datasets, fit every configured
/// method, and emit metric rows. Pure function of `(config, n, rep)`.
pub fn run_replication(config: &SimConfig, n: usize, rep: u32) -> Vec<ResultRow> {
    let spec = config.scenario;
    let sid = spec.id;
    let master = config.master_seed;

    let mut rng = substream(master, pack_stream(sid, PURPOSE_CROSSOVER_TRAIN, n as u16, rep));
    let crossover = gen_crossover_dataset(&spec, n, &mut rng);
    let mut rng = substream(master, pack_stream(sid, PURPOSE_PARALLEL_TRAIN, n as u16, rep));
    let parallel = gen_parallel_dataset(&spec, n, &mut rng);
    let mut rng = substream(master, pack_stream(sid, PURPOSE_TEST, n as u16, rep));
    let test = gen_parallel_dataset(&spec, config.n_test, &mut rng);
    let test_rows: Vec<Vec<f64>> = test.observations().iter().map(|o| o.x.clone()).collect();

    let grid = HyperGrid::defaults_for(n);
    let mut rows = Vec::new();
    for &method in &config.methods {
        let cv_seed = pack_stream(sid, PURPOSE_CV_BASE + method_stable_id(method), n as u16, rep);
        let fitted: Result<RegimeModel, _> = match method {
            Method::CrossoverGowl => {
                let carry = if spec.has_carryover() {
                    CarryoverMode::Estimate(RegressorSpec::forest_with_seed(pack_stream(
                        sid,
                        PURPOSE_FOREST,
                        n as u16,
                        rep,
                    )))
                } else {
                    CarryoverMode::None
                };
                fit_crossover_gowl(&crossover, &grid, carry, cv_seed)
            }
            Method::ParallelGowl => fit_parallel_gowl(&parallel, &grid, cv_seed),
            Method::ParallelOwl => {
                fit_parallel_owl(&parallel, &grid, OwlShift::FoldMin, cv_seed)
            }
            Method::Ridge => fit_ridge_regime(&parallel, &grid.lambdas, grid.folds, cv_seed),
        };

        let metrics = metrics_for(&spec, method);
        match fitted {
            Ok(model) => {
                for metric in metrics {
                    let value = match metric {
                        Metric::Misclassification => misclassification_rate(
                            &test_rows,
                            |x| model.recommend(x).expect("test dimension matches"),
                            |x| spec.optimal_rule(x),
                        )
                        .unwrap_or(f64::NAN),
                        Metric::EstimatedValue => estimated_value(&test, |x| {
                            model.recommend(x).expect("test dimension matches")
                        })
                        .unwrap_or(f64::NAN),
                        Metric::OptimalValue => {
                            estimated_value(&test, |x| spec.optimal_rule(x)).unwrap_or(f64::NAN)
                        }
                        Metric::CarryoverMse => match model.carryover_model() {
                            Some(m) => {
                                let mut acc = 0.0;
                                for o in test.observations() {
                                    let d = m.delta(&o.x, o.a)
                                        - ScenarioSpec::delta(spec, &o.x, o.a);
                                    acc += d * d;
                                }
                                acc / test.n() as f64
                            }
                            Option::None => f64::NAN,
                        },
                    };
                    rows.push(ResultRow {
                        scenario: sid,
                        n_train: n,
                        replication: rep,
                        method,
                        metric,
                        value,
                        converged: model.converged() && value.is_finite(),
                        seed: master,
                    });
                }
            }
            Err(_) => {
                for metric in metrics {
                    rows.push(ResultRow {
                        scenario: sid,
                        n_train: n,
                        replication: rep,
                        method,
                        metric,
                        value: f64::NAN,
                        converged: false,
                        seed: master,
                    });
                }
            }
        }
    }
    rows
}

/// Run the full sweep: every `(n, replication)` pair in order. The output
/// is a pure function of `config`.
pub fn run_experiment(config: &SimConfig) -> Result<Vec<ResultRow>, SimError> {
    config.validate()?;
    let mut rows = Vec::new();
    for &n in &config.n_train {
        for rep in 0..config.replications {
            rows.extend(run_replication(config, n, rep));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const TOL: f64 = 1e-12;

    // Five pinned points; each has at least the 4 coordinates mu reads.
    const POINTS: [[f64; 4]; 5] = [
        [0.1, 0.2, 0.3, 0.4],
        [-0.5, 0.25, 0.8, -0.1],
        [1.0, 1.0, 1.0, 1.0],
        [-1.0, -1.0, -1.0, -1.0],
        [0.0, 0.0, 0.0, 0.0],
    ];

    fn close(actual: f64, expected: f64) {
        assert!(
            (actual - expected).abs() < TOL,
            "{actual} vs {expected}"
        );
    }

    #[test]
    fn mu_pinned_values() {
        let s = ScenarioSpec::with_p(1, 4).unwrap();
        let expected = [2.05, 1.3, 5.5, -3.5, 1.0];
        for (x, e) in POINTS.iter().zip(expected) {
            close(s.mu(x), e);
        }
    }

    #[test]
    fn linear_interaction_pinned_values() {
        // Scenarios 1 and 3 share c = 1.12 (0.3 - x1 - x2).
        let expected = [0.0, 0.616, -1.904, 2.576, 0.336];
        for id in [1, 3] {
            let s = ScenarioSpec::with_p(id, 4).unwrap();
            for (x, e) in POINTS.iter().zip(expected) {
                close(s.c(x), e);
            }
        }
    }

    #[test]
    fn nonlinear_interaction_pinned_values() {
        // Scenarios 2 and 4 share c = 1.15 (x1 - 1.25 x2^2).
        let expected = [0.0575, -0.66484375, -0.2875, -2.5875, 0.0];
        for id in [2, 4] {
            let s = ScenarioSpec::with_p(id, 4).unwrap();
            for (x, e) in POINTS.iter().zip(expected) {
                close(s.c(x), e);
            }
        }
    }

    #[test]
    fn carryover_free_scenarios_have_zero_delta() {
        for id in [1, 2] {
            let s = ScenarioSpec::with_p(id, 4).unwrap();
            assert!(!s.has_carryover());
            for x in &POINTS {
                assert_eq!(ScenarioSpec::delta(s, x, Treatment::Minus), 0.0);
                assert_eq!(ScenarioSpec::delta(s, x, Treatment::Plus), 0.0);
            }
        }
    }

    #[test]
    fn scenario3_delta_pinned_values() {
        let s = ScenarioSpec::with_p(3, 4).unwrap();
        let minus = [0.5125, 0.479, 0.899, 0.231, 0.334];
        let plus = [1.025, 0.342, 3.702, 3.038, 0.332];
        for i in 0..5 {
            close(ScenarioSpec::delta(s, &POINTS[i], Treatment::Minus), minus[i]);
            close(ScenarioSpec::delta(s, &POINTS[i], Treatment::Plus), plus[i]);
            // Scenario 3 deltas are absolute values, hence nonnegative.
            assert!(ScenarioSpec::delta(s, &POINTS[i], Treatment::Minus) >= 0.0);
            assert!(ScenarioSpec::delta(s, &POINTS[i], Treatment::Plus) >= 0.0);
        }
    }

    #[test]
    fn scenario4_delta_pinned_values() {
        let s = ScenarioSpec::with_p(4, 4).unwrap();
        let minus = [0.064, 0.175, 0.7, 0.1, 0.0];
        let plus = [0.76, 1.9375, -2.0, 2.0, 1.0];
        for i in 0..5 {
            close(ScenarioSpec::delta(s, &POINTS[i], Treatment::Minus), minus[i]);
            close(ScenarioSpec::delta(s, &POINTS[i], Treatment::Plus), plus[i]);
        }
    }

    #[test]
    fn optimal_rule_is_sign_of_interaction() {
        let s = ScenarioSpec::with_p(1, 4).unwrap();
        // c(0) = 0.336 > 0.
        assert_eq!(s.optimal_rule(&[0.0; 4]), Treatment::Plus);
        assert_eq!(s.optimal_rule(&[1.0, 1.0, 0.0, 0.0]), Treatment::Minus);
        let s2 = ScenarioSpec::with_p(2, 4).unwrap();
        // c = 0 exactly at the origin: tie goes to +1.
        assert_eq!(s2.optimal_rule(&[0.0; 4]), Treatment::Plus);
    }

    #[test]
    fn scenario_validation() {
        assert_eq!(
            ScenarioSpec::new(0).unwrap_err(),
            SimError::UnknownScenario { id: 0 }
        );
        assert_eq!(
            ScenarioSpec::new(5).unwrap_err(),
            SimError::UnknownScenario { id: 5 }
        );
        assert_eq!(
            ScenarioSpec::with_p(1, 3).unwrap_err(),
            SimError::BadCovariateCount { p: 3 }
        );
        assert_eq!(ScenarioSpec::new(2).unwrap().p(), 50);
    }

    #[test]
    fn covariates_open_support_and_determinism() {
        let mut r1 = substream(9, 1);
        let m1 = gen_covariates(200, 10, &mut r1);
        for i in 0..200 {
            for j in 0..10 {
                let v = m1.get(i, j);
                assert!(v > -1.0 && v < 1.0);
            }
        }
        let mut r2 = substream(9, 1);
        let m2 = gen_covariates(200, 10, &mut r2);
        assert_eq!(m1, m2);
    }

    #[test]
    fn covariate_mean_is_centered() {
        // 10^6 draws; 3 sigma for mean of U(-1,1) is ~0.0017.
        let mut rng = substream(123, 7);
        let n = 1_000_000usize;
        let mut acc = 0.0;
        for _ in 0..n {
            acc += uniform_open_pm1(&mut rng);
        }
        let mean = acc / n as f64;
        assert!(mean.abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn crossover_generator_matches_model_moments() {
        // Residuals against the known conditional means recover the noise:
        // mean(e1) and mean(e2) near 0, Cov(e1, e2) near 0.5, and the
        // within-subject difference has the advertised mean.
        let spec = ScenarioSpec::with_p(3, 6).unwrap();
        let n = 100_000;
        let mut rng = substream(77, 3);
        let data = gen_crossover_dataset(&spec, n, &mut rng);
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        let mut s12 = 0.0;
        let mut sdiff = 0.0;
        for o in data.observations() {
            let mu = spec.mu(&o.x);
            let c = spec.c(&o.x);
            let delta = ScenarioSpec::delta(spec, &o.x, o.a1);
            let e1 = o.y1 - (mu + o.a1.as_f64() * c);
            let e2 = o.y2 - (mu - o.a1.as_f64() * c + delta);
            s1 += e1;
            s2 += e2;
            s12 += e1 * e2;
            // E[Y1 - Y2 | x, a1] = 2 a1 c - delta.
            sdiff += (o.y1 - o.y2) - (2.0 * o.a1.as_f64() * c - delta);
        }
        let nf = n as f64;
        let m1 = s1 / nf;
        let m2 = s2 / nf;
        assert!(m1.abs() < 0.01, "mean e1 {m1}");
        assert!(m2.abs() < 0.01, "mean e2 {m2}");
        let cov = s12 / nf - m1 * m2;
        assert!((cov - 0.5).abs() < 0.01, "cov {cov}");
        // Var(e1 - e2) = 1 + 1 - 2 * 0.5 = 1.
        assert!((sdiff / nf).abs() < 0.015, "diff residual {}", sdiff / nf);
    }

    #[test]
    fn parallel_generator_matches_model_moments() {
        let spec = ScenarioSpec::with_p(2, 5).unwrap();
        let n = 100_000;
        let mut rng = substream(31, 4);
        let data = gen_parallel_dataset(&spec, n, &mut rng);
        let mut s = 0.0;
        let mut ss = 0.0;
        for o in data.observations() {
            let e = o.y - (spec.mu(&o.x) + o.a.as_f64() * spec.c(&o.x));
            s += e;
            ss += e * e;
        }
        let nf = n as f64;
        let mean = s / nf;
        let var = ss / nf - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
        assert!(data.observations().iter().all(|o| o.propensity == 0.5));
    }

    #[test]
    fn generators_are_deterministic_per_stream() {
        let spec = ScenarioSpec::with_p(4, 5).unwrap();
        let mut a = substream(5, 11);
        let mut b = substream(5, 11);
        assert_eq!(
            gen_crossover_dataset(&spec, 40, &mut a),
            gen_crossover_dataset(&spec, 40, &mut b)
        );
        let mut a = substream(5, 12);
        let mut b = substream(5, 12);
        assert_eq!(
            gen_parallel_dataset(&spec, 40, &mut a),
            gen_parallel_dataset(&spec, 40, &mut b)
        );
    }

    fn tiny_config(scenario_id: u8, methods: Vec<Method>) -> SimConfig {
        SimConfig {
            scenario: ScenarioSpec::with_p(scenario_id, 5).unwrap(),
            n_train: vec![30],
            n_test: 200,
            replications: 1,
            methods,
            master_seed: 42,
        }
    }

    #[test]
    fn replication_row_accounting_scenario1() {
        let config = tiny_config(1, vec![Method::CrossoverGowl]);
        let rows = run_experiment(&config).unwrap();
        // No carryover metric in scenario 1.
        assert_eq!(rows.len(), 3);
        for r in &rows {
            assert_eq!(r.scenario, 1);
            assert_eq!(r.n_train, 30);
            assert_eq!(r.replication, 0);
            assert_eq!(r.method, Method::CrossoverGowl);
            assert!(r.value.is_finite(), "{:?}", r);
            assert_eq!(r.seed, 42);
        }
        let metrics: Vec<Metric> = rows.iter().map(|r| r.metric).collect();
        assert_eq!(
            metrics,
            vec![
                Metric::Misclassification,
                Metric::EstimatedValue,
                Metric::OptimalValue
            ]
        );
    }

    #[test]
    fn method_order_does_not_change_results() {
        let a = run_experiment(&tiny_config(1, vec![Method::Ridge, Method::ParallelOwl]))
            .unwrap();
        let b = run_experiment(&tiny_config(1, vec![Method::ParallelOwl, Method::Ridge]))
            .unwrap();
        let pick = |rows: &[ResultRow], m: Method| -> Vec<ResultRow> {
            rows.iter().filter(|r| r.method == m).cloned().collect()
        };
        for m in [Method::Ridge, Method::ParallelOwl] {
            assert_eq!(pick(&a, m), pick(&b, m));
        }
    }

    #[test]
    fn experiment_is_deterministic() {
        let config = tiny_config(2, vec![Method::Ridge]);
        assert_eq!(
            run_experiment(&config).unwrap(),
            run_experiment(&config).unwrap()
        );
    }

    #[test]
    fn config_validation_errors() {
        let mut c = tiny_config(1, vec![Method::Ridge]);
        c.replications = 0;
        assert!(matches!(
            run_experiment(&c),
            Err(SimError::BadConfig { .. })
        ));
        let mut c = tiny_config(1, vec![Method::Ridge]);
        c.n_train = vec![];
        assert!(matches!(
            run_experiment(&c),
            Err(SimError::BadConfig { .. })
        ));
        let mut c = tiny_config(1, vec![]);
        c.methods = vec![];
        assert!(matches!(
            run_experiment(&c),
            Err(SimError::BadConfig { .. })
        ));
    }
}
