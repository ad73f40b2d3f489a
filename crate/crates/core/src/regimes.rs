//! The four regime estimators and cross-validated hyperparameter selection.
//!
//! * [`fit_crossover_gowl`] — the crossover method: per-subject reward
//!   `R = Y1 - (Y2 - delta)`, labels `sign(R) * A1`, weights `|R| /
//!   propensity`, weighted kernel SVM with `(lambda, sigma)` chosen by
//!   k-fold cross-validation on a held-out inverse-propensity value
//!   surrogate.
//! * [`fit_parallel_gowl`] — the same reduction on parallel-design data
//!   with `Y` in place of `R`.
//! * [`fit_parallel_owl`] — classical outcome-weighted learning: labels are
//!   the observed treatments and weights the (shifted-nonnegative)
//!   outcomes. The shift is computed per training fold from that fold's
//!   minimum outcome, and from the full training set for the final refit,
//!   so held-out rows never leak into it. Two fits of the same data that
//!   differ only by a constant added to `Y` may legitimately disagree —
//!   that shift sensitivity is the deficiency the sign-folding methods
//!   remove — so no invariance is asserted anywhere.
//! * [`fit_ridge_regime`] — linear model `(1, x, a, a*x)` with an
//!   unpenalized intercept, penalty chosen by k-fold CV on held-out MSE.
//!
//! Model selection is deterministic: folds come from a seeded shuffle,
//! per-candidate fold scores accumulate into indexed slots (so evaluation
//! order cannot matter), the value-surrogate mean decides, and exact ties
//! break to the larger `lambda`, then the smaller `sigma` (for ridge, the
//! larger penalty). Identical `(data, grid, seed)` give bit-identical
//! models.

use crate::carryover::{
    corrected_rewards, fit_carryover, CarryoverEffect, CarryoverError, CarryoverModel,
};
use crate::data::{split_folds, CrossoverDataset, ParallelDataset, SplitError, Treatment};
use crate::forest::RegressorSpec;
use crate::kernels::{gram_from_sqdist, pairwise_sqdist, KernelError, KernelSpec};
use crate::linalg::{cholesky_solve, CholeskyError, Matrix};
use crate::wsvm::{
    fit_wsvm, sign_plus, solve_dual, DecisionFunction, FitError, ProblemError, SolverOptions,
    WeightedClassificationProblem, REWARD_EPS,
};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

/// Cross-validation grid for the SVM-based methods.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperGrid {
    /// Regularization candidates (all positive).
    pub lambdas: Vec<f64>,
    /// Gaussian bandwidth candidates (all positive).
    pub sigmas: Vec<f64>,
    /// Fold count, at least 2.
    pub folds: usize,
}

impl HyperGrid {
    /// The default grid for a training set of size `n`:
    /// `lambda in {0.1, 0.5, 1, 5, 10, 50, 100, 500} / n`,
    /// `sigma in {0.1, 0.2, ..., 5.0}`, 5 folds.
    pub fn defaults_for(n: usize) -> Self {
        let base = [0.1, 0.5, 1.0, 5.0, 10.0, 50.0, 100.0, 500.0];
        HyperGrid {
            lambdas: base.iter().map(|l| l / n as f64).collect(),
            sigmas: (1..=50).map(|i| i as f64 / 10.0).collect(),
            folds: 5,
        }
    }

    fn validate(&self) -> Result<(), RegimeError> {
        if self.lambdas.is_empty() {
            return Err(RegimeError::Grid {
                reason: "lambda grid is empty",
            });
        }
        if self.sigmas.is_empty() {
            return Err(RegimeError::Grid {
                reason: "sigma grid is empty",
            });
        }
        if self.lambdas.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(RegimeError::Grid {
                reason: "lambda candidates must be finite and positive",
            });
        }
        if self.sigmas.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(RegimeError::Grid {
                reason: "sigma candidates must be finite and positive",
            });
        }
        if self.folds < 2 {
            return Err(RegimeError::Grid {
                reason: "need at least 2 folds",
            });
        }
        Ok(())
    }
}

/// Which estimator produced a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    CrossoverGowl,
    ParallelGowl,
    ParallelOwl,
    Ridge,
}

impl Method {
    /// Stable machine-readable name (used in report rows).
    pub fn name(self) -> &'static str {
        match self {
            Method::CrossoverGowl => "crossover_gowl",
            Method::ParallelGowl => "parallel_gowl",
            Method::ParallelOwl => "parallel_owl",
            Method::Ridge => "ridge",
        }
    }
}

/// How the crossover reward handles the carryover effect.
pub enum CarryoverMode<'a> {
    /// Assume no carryover: `R = Y1 - Y2`.
    None,
    /// Estimate `delta` by the two-stage regression, refit inside every
    /// training fold (held-out rows never inform it).
    Estimate(RegressorSpec),
    /// Use a caller-supplied effect (e.g. the truth in simulations).
    Oracle(&'a dyn CarryoverEffect),
}

/// Outcome shift policy for [`fit_parallel_owl`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OwlShift {
    /// Subtract the training minimum (per fold during CV; full-set for the
    /// final refit).
    FoldMin,
    /// No shift; outcomes must already be nonnegative.
    None,
}

/// The hyperparameters a fit selected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    Kernel { lambda: f64, sigma: f64 },
    Ridge { penalty: f64 },
}

/// CV result for one grid candidate. For SVM methods `mean_score` is the
/// held-out value surrogate (higher is better); for ridge it is the
/// held-out MSE (lower is better).
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateScore {
    pub params: Selection,
    pub mean_score: f64,
    /// Per-fold scores in fold order.
    pub fold_scores: Vec<f64>,
}

/// Everything the selection step saw.
#[derive(Debug, Clone, PartialEq)]
pub struct CvDiagnostics {
    pub candidates: Vec<CandidateScore>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
enum DecisionRule {
    Kernel(DecisionFunction),
    /// Coefficients over `(1, x, a, a*x)` for covariate dimension `p`.
    Ridge { coefficients: Vec<f64>, p: usize },
}

/// A fitted treatment regime: decision rule, method tag, selected
/// hyperparameters, and CV diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeModel {
    method: Method,
    rule: DecisionRule,
    selection: Selection,
    diagnostics: CvDiagnostics,
    converged: bool,
    carryover: Option<CarryoverModel>,
}

impl RegimeModel {
    pub fn method(&self) -> Method {
        self.method
    }

    pub fn selection(&self) -> Selection {
        self.selection
    }

    pub fn diagnostics(&self) -> &CvDiagnostics {
        &self.diagnostics
    }

    /// Whether the final refit converged within the solver's update cap
    /// (always true for ridge).
    pub fn converged(&self) -> bool {
        self.converged
    }

    /// The carryover-effect model estimated during fitting, when the
    /// crossover method ran in estimate mode.
    pub fn carryover_model(&self) -> Option<&CarryoverModel> {
        self.carryover.as_ref()
    }

    /// The kernel decision function, when the model is an SVM fit.
    pub fn kernel_decision(&self) -> Option<&DecisionFunction> {
        match &self.rule {
            DecisionRule::Kernel(d) => Some(d),
            DecisionRule::Ridge { .. } => None,
        }
    }

    /// Ridge coefficients over `(1, x, a, a*x)`, when the model is a ridge
    /// fit.
    pub fn ridge_coefficients(&self) -> Option<&[f64]> {
        match &self.rule {
            DecisionRule::Kernel(_) => None,
            DecisionRule::Ridge { coefficients, .. } => Some(coefficients),
        }
    }

    /// The raw decision value whose sign is the recommendation: `f(x)` for
    /// kernel models, `yhat(x, +1) - yhat(x, -1)` for ridge.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64, RegimeError> {
        match &self.rule {
            DecisionRule::Kernel(d) => d.evaluate(x).map_err(RegimeError::from),
            DecisionRule::Ridge { coefficients, p } => {
                if x.len() != *p {
                    return Err(RegimeError::Dimension {
                        expected: *p,
                        found: x.len(),
                    });
                }
                Ok(ridge_predict(coefficients, x, Treatment::Plus)
                    - ridge_predict(coefficients, x, Treatment::Minus))
            }
        }
    }

    /// The recommended treatment: `sign` of the decision value, with
    /// `sign(0) := +1`.
    pub fn recommend(&self, x: &[f64]) -> Result<Treatment, RegimeError> {
        Ok(Treatment::from_sign(self.decision_value(x)?))
    }
}

/// Errors from regime fitting.
#[derive(Debug)]
pub enum RegimeError {
    /// Ill-formed hyperparameter grid.
    Grid { reason: &'static str },
    /// Fold construction failed.
    Split(SplitError),
    /// A training fold lacks both label signs among its positive-weight
    /// rows, so the SVM subproblem is one-sided. `fold` is the held-out
    /// fold index.
    PoorAllocation { fold: usize },
    /// Every reward (or every shifted outcome) is zero: nothing to learn
    /// from.
    DegenerateReward,
    /// An outcome is negative but the shift policy is `OwlShift::None`.
    NegativeOutcome { row: usize },
    /// A ridge penalty candidate is not positive (or is NaN).
    BadPenalty { value: f64 },
    /// Covariate dimension mismatch at prediction time.
    Dimension { expected: usize, found: usize },
    Carryover(CarryoverError),
    Problem(ProblemError),
    Fit(FitError),
    Linalg(CholeskyError),
}

impl core::fmt::Display for RegimeError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            RegimeError::Grid { reason } => write!(f, "bad hyperparameter grid: {reason}"),
            RegimeError::Split(e) => write!(f, "fold split: {e}"),
            RegimeError::PoorAllocation { fold } => write!(
                f,
                "cross-validation fold {fold}: training rows carry only one label sign"
            ),
            RegimeError::DegenerateReward => {
                write!(f, "all rewards are zero; the regime is unidentified")
            }
            RegimeError::NegativeOutcome { row } => write!(
                f,
                "row {row} has a negative outcome; use the fold-minimum shift"
            ),
            RegimeError::BadPenalty { value } => {
                write!(f, "ridge penalty must be positive, got {value}")
            }
            RegimeError::Dimension { expected, found } => {
                write!(f, "model built for {expected} covariates, got {found}")
            }
            RegimeError::Carryover(e) => write!(f, "carryover estimation: {e}"),
            RegimeError::Problem(e) => write!(f, "problem construction: {e}"),
            RegimeError::Fit(e) => write!(f, "svm fit: {e}"),
            RegimeError::Linalg(e) => write!(f, "ridge solve: {e}"),
        }
    }
}

impl core::error::Error for RegimeError {}

impl From<SplitError> for RegimeError {
    fn from(e: SplitError) -> Self {
        RegimeError::Split(e)
    }
}

impl From<CarryoverError> for RegimeError {
    fn from(e: CarryoverError) -> Self {
        RegimeError::Carryover(e)
    }
}

impl From<ProblemError> for RegimeError {
    fn from(e: ProblemError) -> Self {
        RegimeError::Problem(e)
    }
}

impl From<FitError> for RegimeError {
    fn from(e: FitError) -> Self {
        RegimeError::Fit(e)
    }
}

impl From<CholeskyError> for RegimeError {
    fn from(e: CholeskyError) -> Self {
        RegimeError::Linalg(e)
    }
}

impl From<KernelError> for RegimeError {
    fn from(e: KernelError) -> Self {
        match e {
            KernelError::DimensionMismatch { left, right } => RegimeError::Dimension {
                expected: left,
                found: right,
            },
            // Unreachable from a validated fit, but map it sensibly.
            KernelError::BadBandwidth { value } => RegimeError::Grid {
                reason: if value.is_nan() {
                    "bandwidth is NaN"
                } else {
                    "bandwidth must be positive"
                },
            },
        }
    }
}

/// Classification labels and weights from rewards: `label = sign(r) * a`,
/// `weight = |r| / propensity`, with `|r| < REWARD_EPS` giving weight
/// exactly 0. Satisfies `label * weight * propensity == r * a` bit-exactly
/// whenever the weight is nonzero and the propensity divides `|r|` exactly
/// back (e.g. constant 0.5).
fn reward_parts(
    rewards: &[f64],
    treatments: &[Treatment],
    propensities: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let labels: Vec<f64> = rewards
        .iter()
        .zip(treatments)
        .map(|(&r, a)| sign_plus(r) * a.as_f64())
        .collect();
    let weights: Vec<f64> = rewards
        .iter()
        .zip(propensities)
        .map(|(&r, &pi)| if r.abs() < REWARD_EPS { 0.0 } else { r.abs() / pi })
        .collect();
    (labels, weights)
}

fn submatrix(m: &Matrix, rows: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(rows.len(), m.cols());
    for (r_out, &r_in) in rows.iter().enumerate() {
        for c in 0..m.cols() {
            out.set(r_out, c, m.get(r_in, c));
        }
    }
    out
}

fn crossover_features(data: &CrossoverDataset) -> Matrix {
    let mut m = Matrix::zeros(data.n(), data.p());
    for (i, o) in data.observations().iter().enumerate() {
        for c in 0..data.p() {
            m.set(i, c, o.x[c]);
        }
    }
    m
}

fn parallel_features(data: &ParallelDataset) -> Matrix {
    let mut m = Matrix::zeros(data.n(), data.p());
    for (i, o) in data.observations().iter().enumerate() {
        for c in 0..data.p() {
            m.set(i, c, o.x[c]);
        }
    }
    m
}

/// One held-out subject's scoring ingredients.
struct HeldoutRow {
    reward: f64,
    a: Treatment,
    propensity: f64,
}

/// Training labels/weights plus held-out scoring rows for one fold.
struct FoldIngredients {
    labels: Vec<f64>,
    weights: Vec<f64>,
    heldout: Vec<HeldoutRow>,
}

/// Shared CV engine for the SVM methods. For every fold, `build` supplies
/// the training labels/weights and held-out scoring rows (computing
/// anything fold-specific, like a refitted carryover effect, from the
/// training rows only). Each `(sigma, lambda)` candidate is fit on the
/// training Gram matrix and scored by the held-out value surrogate
/// `mean[ reward_i * 1{a_i = sign f(x_i)} / propensity_i ]`. Scores land in
/// slots indexed by candidate and fold, so no evaluation order can affect
/// the outcome. Returns the selected `(lambda, sigma)` and the full
/// candidate table.
fn cv_select_kernel<F>(
    features: &Matrix,
    grid: &HyperGrid,
    folds: &[Vec<usize>],
    mut build: F,
    warnings: &mut Vec<String>,
) -> Result<(f64, f64, Vec<CandidateScore>), RegimeError>
where
    F: FnMut(usize, &[usize], &[usize]) -> Result<FoldIngredients, RegimeError>,
{
    let n = features.rows();
    let n_lambda = grid.lambdas.len();
    let n_cand = grid.sigmas.len() * n_lambda;
    let mut fold_scores = vec![vec![0.0f64; folds.len()]; n_cand];
    let mut capped = 0usize;
    let opts = SolverOptions::default();

    for (fold_idx, fold) in folds.iter().enumerate() {
        let train: Vec<usize> = (0..n).filter(|i| !fold.contains(i)).collect();
        let ing = build(fold_idx, &train, fold)?;
        let has_pos = ing
            .labels
            .iter()
            .zip(&ing.weights)
            .any(|(&l, &w)| w > 0.0 && l > 0.0);
        let has_neg = ing
            .labels
            .iter()
            .zip(&ing.weights)
            .any(|(&l, &w)| w > 0.0 && l < 0.0);
        if !(has_pos && has_neg) {
            return Err(RegimeError::PoorAllocation { fold: fold_idx });
        }

        let train_feats = submatrix(features, &train);
        let held_feats = submatrix(features, fold);
        // Squared distances once per fold; Gram matrices once per sigma.
        let train_sq = pairwise_sqdist(&train_feats, &train_feats);
        let cross_sq = pairwise_sqdist(&held_feats, &train_feats);
        let n_train = train.len() as f64;

        for (si, &sigma) in grid.sigmas.iter().enumerate() {
            let train_gram = gram_from_sqdist(&train_sq, sigma);
            let cross_gram = gram_from_sqdist(&cross_sq, sigma);
            for (li, &lambda) in grid.lambdas.iter().enumerate() {
                let caps: Vec<f64> = ing
                    .weights
                    .iter()
                    .map(|w| w / (2.0 * lambda * n_train))
                    .collect();
                let sol = solve_dual(&train_gram, &ing.labels, &caps, &opts);
                if !sol.info.converged {
                    capped += 1;
                }
                let mut acc = 0.0;
                for (h, hr) in ing.heldout.iter().enumerate() {
                    let mut fval = sol.intercept;
                    for (j, &a) in sol.alphas.iter().enumerate() {
                        if a > 0.0 {
                            fval += a * ing.labels[j] * cross_gram.get(h, j);
                        }
                    }
                    if Treatment::from_sign(fval) == hr.a {
                        acc += hr.reward / hr.propensity;
                    }
                }
                fold_scores[si * n_lambda + li][fold_idx] = acc / fold.len() as f64;
            }
        }
    }

    if capped > 0 {
        let total = n_cand * folds.len();
        warnings.push(format!(
            "{capped} of {total} cross-validation fits hit the update cap"
        ));
    }

    let mut candidates = Vec::with_capacity(n_cand);
    let mut best: Option<(f64, f64, f64)> = None; // (score, lambda, sigma)
    for (si, &sigma) in grid.sigmas.iter().enumerate() {
        for (li, &lambda) in grid.lambdas.iter().enumerate() {
            let fs = &fold_scores[si * n_lambda + li];
            let mean = fs.iter().sum::<f64>() / fs.len() as f64;
            candidates.push(CandidateScore {
                params: Selection::Kernel { lambda, sigma },
                mean_score: mean,
                fold_scores: fs.clone(),
            });
            let better = match best {
                Option::None => true,
                Some((bs, bl, bsig)) => {
                    mean > bs
                        || (mean == bs && (lambda > bl || (lambda == bl && sigma < bsig)))
                }
            };
            if better {
                best = Some((mean, lambda, sigma));
            }
        }
    }
    let (_, lambda, sigma) = best.expect("grid is validated nonempty");
    Ok((lambda, sigma, candidates))
}

/// Final refit on the full data at the selected `(lambda, sigma)` and model
/// assembly shared by the SVM methods.
#[allow(clippy::too_many_arguments)]
fn finish_kernel_fit(
    method: Method,
    features: Matrix,
    treatments: &[Treatment],
    rewards: &[f64],
    propensities: &[f64],
    lambda: f64,
    sigma: f64,
    candidates: Vec<CandidateScore>,
    mut warnings: Vec<String>,
    carryover: Option<CarryoverModel>,
) -> Result<RegimeModel, RegimeError> {
    let problem = WeightedClassificationProblem::from_rewards(
        features,
        treatments,
        rewards,
        propensities,
        lambda,
        KernelSpec::Gaussian { bandwidth: sigma },
    )?;
    let fit = fit_wsvm(&problem, &SolverOptions::default())?;
    if !fit.info.converged {
        warnings.push(format!(
            "final refit hit the update cap (violation {:e})",
            fit.info.violation
        ));
    }
    Ok(RegimeModel {
        method,
        rule: DecisionRule::Kernel(fit.decision),
        selection: Selection::Kernel { lambda, sigma },
        diagnostics: CvDiagnostics {
            candidates,
            warnings,
        },
        converged: fit.info.converged,
        carryover,
    })
}

/// Fit the crossover regime: rewards `R_i = y1_i - (y2_i - delta(x_i,
/// a1_i))` per `carryover`, labels `sign(R) * a1`, weights `|R| /
/// propensity`, Gaussian-kernel weighted SVM with CV-selected `(lambda,
/// sigma)`.
///
/// Folds are stratified on `sign(R) * a1`. When `carryover` is
/// `Estimate`, the stratification key uses the uncorrected differences
/// `sign(y1 - y2) * a1` (the corrected rewards are fold-dependent there),
/// and the effect is refit inside every training fold; the final refit
/// estimates it from the full training set.
pub fn fit_crossover_gowl(
    data: &CrossoverDataset,
    grid: &HyperGrid,
    carryover: CarryoverMode<'_>,
    seed: u64,
) -> Result<RegimeModel, RegimeError> {
    grid.validate()?;
    let n = data.n();
    let obs = data.observations();

    let full_model = match &carryover {
        CarryoverMode::Estimate(spec) => Some(fit_carryover(data, spec)?),
        _ => Option::None,
    };
    let full_rewards = match (&carryover, &full_model) {
        (CarryoverMode::Estimate(_), Some(m)) => corrected_rewards(data, Some(m))?,
        (CarryoverMode::Oracle(d), _) => corrected_rewards(data, Some(*d))?,
        _ => corrected_rewards(data, Option::None)?,
    };
    if full_rewards.iter().all(|r| r.abs() < REWARD_EPS) {
        return Err(RegimeError::DegenerateReward);
    }

    let strat: Vec<f64> = match &carryover {
        CarryoverMode::Estimate(_) => obs
            .iter()
            .map(|o| sign_plus(o.y1 - o.y2) * o.a1.as_f64())
            .collect(),
        _ => full_rewards
            .iter()
            .zip(obs)
            .map(|(r, o)| sign_plus(*r) * o.a1.as_f64())
            .collect(),
    };
    let split = split_folds(n, grid.folds, Some(&strat), seed)?;
    let mut warnings = Vec::new();
    if split.poor_allocation {
        warnings.push(String::from(
            "a label stratum has fewer subjects than folds; some folds miss it",
        ));
    }

    let features = crossover_features(data);
    let build = |_fold_idx: usize,
                 train: &[usize],
                 fold: &[usize]|
     -> Result<FoldIngredients, RegimeError> {
        let (train_rewards, held_rewards): (Vec<f64>, Vec<f64>) = match &carryover {
            CarryoverMode::Estimate(spec) => {
                let train_ds = data.subset(train);
                let m = fit_carryover(&train_ds, spec)?;
                let tr = corrected_rewards(&train_ds, Some(&m))?;
                let hr = fold
                    .iter()
                    .map(|&i| {
                        let o = &obs[i];
                        o.y1 - (o.y2 - m.delta(&o.x, o.a1))
                    })
                    .collect();
                (tr, hr)
            }
            _ => (
                train.iter().map(|&i| full_rewards[i]).collect(),
                fold.iter().map(|&i| full_rewards[i]).collect(),
            ),
        };
        let train_treatments: Vec<Treatment> = train.iter().map(|&i| obs[i].a1).collect();
        let train_props: Vec<f64> = train.iter().map(|&i| obs[i].propensity).collect();
        let (labels, weights) = reward_parts(&train_rewards, &train_treatments, &train_props);
        let heldout = fold
            .iter()
            .zip(held_rewards)
            .map(|(&i, reward)| HeldoutRow {
                reward,
                a: obs[i].a1,
                propensity: obs[i].propensity,
            })
            .collect();
        Ok(FoldIngredients {
            labels,
            weights,
            heldout,
        })
    };

    let (lambda, sigma, candidates) =
        cv_select_kernel(&features, grid, &split.folds, build, &mut warnings)?;

    let treatments: Vec<Treatment> = obs.iter().map(|o| o.a1).collect();
    let propensities: Vec<f64> = obs.iter().map(|o| o.propensity).collect();
    finish_kernel_fit(
        Method::CrossoverGowl,
        features,
        &treatments,
        &full_rewards,
        &propensities,
        lambda,
        sigma,
        candidates,
        warnings,
        full_model,
    )
}

/// Fit the parallel-design sign-folding method: labels `sign(y) * a`,
/// weights `|y| / propensity`. Folds are stratified on the labels.
pub fn fit_parallel_gowl(
    data: &ParallelDataset,
    grid: &HyperGrid,
    seed: u64,
) -> Result<RegimeModel, RegimeError> {
    grid.validate()?;
    let obs = data.observations();
    let outcomes: Vec<f64> = obs.iter().map(|o| o.y).collect();
    if outcomes.iter().all(|y| y.abs() < REWARD_EPS) {
        return Err(RegimeError::DegenerateReward);
    }
    let strat: Vec<f64> = obs
        .iter()
        .map(|o| sign_plus(o.y) * o.a.as_f64())
        .collect();
    let split = split_folds(data.n(), grid.folds, Some(&strat), seed)?;
    let mut warnings = Vec::new();
    if split.poor_allocation {
        warnings.push(String::from(
            "a label stratum has fewer subjects than folds; some folds miss it",
        ));
    }

    let features = parallel_features(data);
    let build = |_fold_idx: usize,
                 train: &[usize],
                 fold: &[usize]|
     -> Result<FoldIngredients, RegimeError> {
        let train_rewards: Vec<f64> = train.iter().map(|&i| obs[i].y).collect();
        let train_treatments: Vec<Treatment> = train.iter().map(|&i| obs[i].a).collect();
        let train_props: Vec<f64> = train.iter().map(|&i| obs[i].propensity).collect();
        let (labels, weights) = reward_parts(&train_rewards, &train_treatments, &train_props);
        let heldout = fold
            .iter()
            .map(|&i| HeldoutRow {
                reward: obs[i].y,
                a: obs[i].a,
                propensity: obs[i].propensity,
            })
            .collect();
        Ok(FoldIngredients {
            labels,
            weights,
            heldout,
        })
    };

    let (lambda, sigma, candidates) =
        cv_select_kernel(&features, grid, &split.folds, build, &mut warnings)?;

    let treatments: Vec<Treatment> = obs.iter().map(|o| o.a).collect();
    let propensities: Vec<f64> = obs.iter().map(|o| o.propensity).collect();
    finish_kernel_fit(
        Method::ParallelGowl,
        features,
        &treatments,
        &outcomes,
        &propensities,
        lambda,
        sigma,
        candidates,
        warnings,
        Option::None,
    )
}

/// Fit classical outcome-weighted learning on parallel data: labels are
/// the observed treatments, weights the shifted outcomes `(y - shift) /
/// propensity`. Folds are stratified on the treatment. Held-out candidates
/// are scored with the raw (unshifted) outcomes — the shift is a fitting
/// device, not part of the value.
pub fn fit_parallel_owl(
    data: &ParallelDataset,
    grid: &HyperGrid,
    shift: OwlShift,
    seed: u64,
) -> Result<RegimeModel, RegimeError> {
    grid.validate()?;
    let obs = data.observations();
    let outcomes: Vec<f64> = obs.iter().map(|o| o.y).collect();
    match shift {
        OwlShift::FoldMin => {
            let min = outcomes.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = outcomes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if max - min < REWARD_EPS {
                return Err(RegimeError::DegenerateReward);
            }
        }
        OwlShift::None => {
            if let Some(row) = outcomes.iter().position(|y| *y < 0.0) {
                return Err(RegimeError::NegativeOutcome { row });
            }
            if outcomes.iter().all(|y| y.abs() < REWARD_EPS) {
                return Err(RegimeError::DegenerateReward);
            }
        }
    }

    let strat: Vec<f64> = obs.iter().map(|o| o.a.as_f64()).collect();
    let split = split_folds(data.n(), grid.folds, Some(&strat), seed)?;
    let mut warnings = Vec::new();
    if split.poor_allocation {
        warnings.push(String::from(
            "a treatment arm has fewer subjects than folds; some folds miss it",
        ));
    }

    let features = parallel_features(data);
    let shifted = |ys: &[f64], shift_by: f64, props: &[f64]| -> Vec<f64> {
        ys.iter()
            .zip(props)
            .map(|(&y, &pi)| {
                let s = y - shift_by;
                if s < REWARD_EPS {
                    0.0
                } else {
                    s / pi
                }
            })
            .collect()
    };
    let build = |_fold_idx: usize,
                 train: &[usize],
                 fold: &[usize]|
     -> Result<FoldIngredients, RegimeError> {
        let train_y: Vec<f64> = train.iter().map(|&i| obs[i].y).collect();
        let train_props: Vec<f64> = train.iter().map(|&i| obs[i].propensity).collect();
        let shift_by = match shift {
            OwlShift::FoldMin => train_y.iter().cloned().fold(f64::INFINITY, f64::min),
            OwlShift::None => 0.0,
        };
        let labels: Vec<f64> = train.iter().map(|&i| obs[i].a.as_f64()).collect();
        let weights = shifted(&train_y, shift_by, &train_props);
        let heldout = fold
            .iter()
            .map(|&i| HeldoutRow {
                reward: obs[i].y,
                a: obs[i].a,
                propensity: obs[i].propensity,
            })
            .collect();
        Ok(FoldIngredients {
            labels,
            weights,
            heldout,
        })
    };

    let (lambda, sigma, candidates) =
        cv_select_kernel(&features, grid, &split.folds, build, &mut warnings)?;

    // Final refit: shift from the full training set.
    let shift_by = match shift {
        OwlShift::FoldMin => outcomes.iter().cloned().fold(f64::INFINITY, f64::min),
        OwlShift::None => 0.0,
    };
    let n = data.n();
    let labels: Vec<f64> = obs.iter().map(|o| o.a.as_f64()).collect();
    let propensities: Vec<f64> = obs.iter().map(|o| o.propensity).collect();
    let weights = shifted(&outcomes, shift_by, &propensities);
    let problem = WeightedClassificationProblem::new(
        features,
        labels,
        weights,
        grid_lambda_checked(lambda)?,
        KernelSpec::Gaussian { bandwidth: sigma },
    )?;
    debug_assert_eq!(problem.n(), n);
    let fit = fit_wsvm(&problem, &SolverOptions::default())?;
    if !fit.info.converged {
        warnings.push(format!(
            "final refit hit the update cap (violation {:e})",
            fit.info.violation
        ));
    }
    Ok(RegimeModel {
        method: Method::ParallelOwl,
        rule: DecisionRule::Kernel(fit.decision),
        selection: Selection::Kernel { lambda, sigma },
        diagnostics: CvDiagnostics {
            candidates,
            warnings,
        },
        converged: fit.info.converged,
        carryover: Option::None,
    })
}

fn grid_lambda_checked(lambda: f64) -> Result<f64, RegimeError> {
    // Grid validation already enforced this; keep the refit honest anyway.
    if lambda.is_finite() && lambda > 0.0 {
        Ok(lambda)
    } else {
        Err(RegimeError::Grid {
            reason: "lambda candidates must be finite and positive",
        })
    }
}

/// Ridge prediction over the feature map `(1, x, a, a*x)`.
fn ridge_predict(coefficients: &[f64], x: &[f64], a: Treatment) -> f64 {
    let p = x.len();
    debug_assert_eq!(coefficients.len(), 2 * p + 2);
    let av = a.as_f64();
    let mut acc = coefficients[0];
    for (c, xi) in coefficients[1..1 + p].iter().zip(x) {
        acc += c * xi;
    }
    acc += coefficients[1 + p] * av;
    for (c, xi) in coefficients[2 + p..].iter().zip(x) {
        acc += c * av * xi;
    }
    acc
}

fn ridge_design(data: &ParallelDataset, rows: &[usize]) -> (Matrix, Vec<f64>) {
    let obs = data.observations();
    let p = data.p();
    let d = 2 * p + 2;
    let mut phi = Matrix::zeros(rows.len(), d);
    let mut y = Vec::with_capacity(rows.len());
    for (r, &i) in rows.iter().enumerate() {
        let o = &obs[i];
        let av = o.a.as_f64();
        phi.set(r, 0, 1.0);
        for c in 0..p {
            phi.set(r, 1 + c, o.x[c]);
        }
        phi.set(r, 1 + p, av);
        for c in 0..p {
            phi.set(r, 2 + p + c, av * o.x[c]);
        }
        y.push(o.y);
    }
    (phi, y)
}

/// Solve the ridge normal equations with an unpenalized intercept. An
/// infinite penalty is the exact limit: intercept = mean(y), all other
/// coefficients exactly zero.
fn ridge_solve(phi: &Matrix, y: &[f64], penalty: f64) -> Result<Vec<f64>, RegimeError> {
    let d = phi.cols();
    if penalty.is_infinite() {
        let mut coef = vec![0.0; d];
        coef[0] = y.iter().sum::<f64>() / y.len() as f64;
        return Ok(coef);
    }
    let mut a = phi.gram_t();
    for j in 1..d {
        a.set(j, j, a.get(j, j) + penalty);
    }
    let b = phi.mul_t_vec(y);
    Ok(cholesky_solve(&a, &b)?)
}

/// Fit the linear baseline: ridge regression of `y` on `(1, x, a, a*x)`
/// with an unpenalized intercept, penalty chosen by k-fold CV on held-out
/// mean squared error (ties break to the larger penalty). The regime is
/// `sign(yhat(x, +1) - yhat(x, -1))`, ties to `+1`.
pub fn fit_ridge_regime(
    data: &ParallelDataset,
    penalties: &[f64],
    folds: usize,
    seed: u64,
) -> Result<RegimeModel, RegimeError> {
    if penalties.is_empty() {
        return Err(RegimeError::Grid {
            reason: "penalty grid is empty",
        });
    }
    if let Some(bad) = penalties.iter().find(|v| v.is_nan() || **v <= 0.0) {
        return Err(RegimeError::BadPenalty { value: *bad });
    }
    if folds < 2 {
        return Err(RegimeError::Grid {
            reason: "need at least 2 folds",
        });
    }
    let n = data.n();
    let split = split_folds(n, folds, Option::None, seed)?;
    let obs = data.observations();

    let mut fold_mse = vec![vec![0.0f64; split.folds.len()]; penalties.len()];
    for (fold_idx, fold) in split.folds.iter().enumerate() {
        let train: Vec<usize> = (0..n).filter(|i| !fold.contains(i)).collect();
        let (phi, y) = ridge_design(data, &train);
        for (pi, &penalty) in penalties.iter().enumerate() {
            let coef = ridge_solve(&phi, &y, penalty)?;
            let mut acc = 0.0;
            for &i in fold {
                let o = &obs[i];
                let pred = ridge_predict(&coef, &o.x, o.a);
                acc += (pred - o.y) * (pred - o.y);
            }
            fold_mse[pi][fold_idx] = acc / fold.len() as f64;
        }
    }

    let mut candidates = Vec::with_capacity(penalties.len());
    let mut best: Option<(f64, f64)> = None; // (mse, penalty)
    for (pi, &penalty) in penalties.iter().enumerate() {
        let fs = &fold_mse[pi];
        let mean = fs.iter().sum::<f64>() / fs.len() as f64;
        candidates.push(CandidateScore {
            params: Selection::Ridge { penalty },
            mean_score: mean,
            fold_scores: fs.clone(),
        });
        let better = match best {
            Option::None => true,
            Some((bm, bp)) => mean < bm || (mean == bm && penalty > bp),
        };
        if better {
            best = Some((mean, penalty));
        }
    }
    let (_, penalty) = best.expect("penalty grid is nonempty");

    let all: Vec<usize> = (0..n).collect();
    let (phi, y) = ridge_design(data, &all);
    let coefficients = ridge_solve(&phi, &y, penalty)?;
    Ok(RegimeModel {
        method: Method::Ridge,
        rule: DecisionRule::Ridge {
            coefficients,
            p: data.p(),
        },
        selection: Selection::Ridge { penalty },
        diagnostics: CvDiagnostics {
            candidates,
            warnings: Vec::new(),
        },
        converged: true,
        carryover: Option::None,
    })
}
