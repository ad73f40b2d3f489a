//! Weighted soft-margin kernel SVM: the shared solver behind every
//! OWL-family regime estimator.
//!
//! All the estimators reduce to one problem: given features, labels
//! `y_i in {-1, +1}`, per-row nonnegative weights `w_i`, and a ridge penalty
//! `lambda`, minimize
//!
//! ```text
//! (1/n) sum_i w_i * max(1 - y_i f(x_i), 0)  +  lambda ||f||^2
//! ```
//!
//! over `f(x) = sum_j beta_j k(x_j, x) + b` with the intercept `b`
//! unpenalized. The solver works on the equivalent dual
//!
//! ```text
//! maximize  W(alpha) = sum_i alpha_i - (1/2) sum_ij alpha_i alpha_j y_i y_j K_ij
//! subject to 0 <= alpha_i <= C_i = w_i / (2 lambda n),   sum_i alpha_i y_i = 0
//! ```
//!
//! by sequential two-variable updates on the maximal-KKT-violating pair,
//! with deterministic lowest-index tie-breaking. At the optimum
//! `beta_i = alpha_i y_i` and the primal objective equals
//! `2 lambda W(alpha)` (the derivation ships in the repository's math
//! notes). Rows with `w_i = 0` have `C_i = 0` and are inert: they can be
//! deleted without changing the result, bit for bit.

use crate::data::Treatment;
use crate::kernels::{gram_matrix, kernel_eval, KernelError, KernelSpec};
use crate::linalg::Matrix;
use alloc::vec;
use alloc::vec::Vec;

/// `sign(v)` with the crate-wide tie rule `sign(0) := +1`.
#[inline]
pub fn sign_plus(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Rewards smaller than this in magnitude are treated as exactly zero when
/// building classification weights, so the sign tie rule can never matter.
pub const REWARD_EPS: f64 = 1e-12;

/// The piecewise hinge surrogate `psi(u, v) = max(1 - sign(u) v, 0)` with
/// `sign(0) := +1`.
#[inline]
pub fn psi_loss(u: f64, v: f64) -> f64 {
    (1.0 - sign_plus(u) * v).max(0.0)
}

/// A weighted binary classification problem: the common reduction of the
/// OWL-family objectives.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedClassificationProblem {
    features: Matrix,
    labels: Vec<f64>,
    weights: Vec<f64>,
    lambda: f64,
    kernel: KernelSpec,
}

/// Why a [`WeightedClassificationProblem`] could not be constructed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProblemError {
    /// `labels` / `weights` length differs from the feature row count.
    LengthMismatch { rows: usize, labels: usize, weights: usize },
    /// A label other than exactly `-1.0` or `+1.0`.
    BadLabel { row: usize, value: f64 },
    /// A negative, NaN, or infinite weight.
    BadWeight { row: usize, value: f64 },
    /// `lambda` not a positive finite number.
    BadLambda { value: f64 },
    /// Every weight is zero: the objective is constant and no regime is
    /// identified (degenerate rewards).
    NoPositiveWeight,
    /// Invalid kernel parameters.
    Kernel(KernelError),
    /// A propensity outside `(0, 1]` was supplied to the reward reduction.
    BadPropensity { row: usize, value: f64 },
    /// No rows.
    Empty,
}

impl core::fmt::Display for ProblemError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ProblemError::LengthMismatch { rows, labels, weights } => write!(
                f,
                "features have {rows} rows but got {labels} labels and {weights} weights"
            ),
            ProblemError::BadLabel { row, value } => {
                write!(f, "row {row}: label must be -1 or +1, got {value}")
            }
            ProblemError::BadWeight { row, value } => {
                write!(f, "row {row}: weight must be finite and >= 0, got {value}")
            }
            ProblemError::BadLambda { value } => {
                write!(f, "lambda must be positive and finite, got {value}")
            }
            ProblemError::NoPositiveWeight => {
                write!(f, "all weights are zero; the problem identifies no regime")
            }
            ProblemError::Kernel(e) => write!(f, "kernel: {e}"),
            ProblemError::BadPropensity { row, value } => {
                write!(f, "row {row}: propensity {value} is outside (0, 1]")
            }
            ProblemError::Empty => write!(f, "no rows"),
        }
    }
}

impl core::error::Error for ProblemError {}

impl From<KernelError> for ProblemError {
    fn from(e: KernelError) -> Self {
        ProblemError::Kernel(e)
    }
}

impl WeightedClassificationProblem {
    /// Validate and construct a problem.
    pub fn new(
        features: Matrix,
        labels: Vec<f64>,
        weights: Vec<f64>,
        lambda: f64,
        kernel: KernelSpec,
    ) -> Result<Self, ProblemError> {
        let n = features.rows();
        if n == 0 {
            return Err(ProblemError::Empty);
        }
        if labels.len() != n || weights.len() != n {
            return Err(ProblemError::LengthMismatch {
                rows: n,
                labels: labels.len(),
                weights: weights.len(),
            });
        }
        for (row, &l) in labels.iter().enumerate() {
            if l != 1.0 && l != -1.0 {
                return Err(ProblemError::BadLabel { row, value: l });
            }
        }
        let mut any_positive = false;
        for (row, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(ProblemError::BadWeight { row, value: w });
            }
            any_positive |= w > 0.0;
        }
        if !any_positive {
            return Err(ProblemError::NoPositiveWeight);
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(ProblemError::BadLambda { value: lambda });
        }
        kernel.validate()?;
        Ok(WeightedClassificationProblem {
            features,
            labels,
            weights,
            lambda,
            kernel,
        })
    }

    /// Build the problem from per-subject rewards: label
    /// `sign(reward_i) * a_i` and weight `|reward_i| / propensity_i`, with
    /// `|reward| < `[`REWARD_EPS`] mapped to weight exactly zero so the sign
    /// tie-break is irrelevant.
    pub fn from_rewards(
        features: Matrix,
        treatments: &[Treatment],
        rewards: &[f64],
        propensities: &[f64],
        lambda: f64,
        kernel: KernelSpec,
    ) -> Result<Self, ProblemError> {
        let n = features.rows();
        if treatments.len() != n || rewards.len() != n || propensities.len() != n {
            return Err(ProblemError::LengthMismatch {
                rows: n,
                labels: treatments.len(),
                weights: rewards.len(),
            });
        }
        for (row, &p) in propensities.iter().enumerate() {
            if !(p > 0.0 && p <= 1.0) {
                return Err(ProblemError::BadPropensity { row, value: p });
            }
        }
        let labels: Vec<f64> = treatments
            .iter()
            .zip(rewards)
            .map(|(a, &r)| sign_plus(r) * a.as_f64())
            .collect();
        let weights: Vec<f64> = rewards
            .iter()
            .zip(propensities)
            .map(|(&r, &p)| if r.abs() < REWARD_EPS { 0.0 } else { r.abs() / p })
            .collect();
        Self::new(features, labels, weights, lambda, kernel)
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    /// Per-row dual box caps `C_i = w_i / (2 lambda n)`.
    pub fn box_caps(&self) -> Vec<f64> {
        let scale = 1.0 / (2.0 * self.lambda * self.n() as f64);
        self.weights.iter().map(|&w| w * scale).collect()
    }
}

/// Solver tolerances and limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop when the maximal KKT violation is at most this.
    pub tol: f64,
    /// Hard cap on two-variable pair updates.
    pub max_pair_updates: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-4,
            max_pair_updates: 100_000,
        }
    }
}

/// How a solve terminated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveInfo {
    /// True when the KKT violation reached `tol`; false when the update cap
    /// was exhausted first.
    pub converged: bool,
    /// Pair updates performed.
    pub pair_updates: u64,
    /// KKT violation at termination.
    pub violation: f64,
}

/// Kernel expansion `f(x) = sum_j beta_j k(p_j, x) + b`; the regime is
/// `sign(f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionFunction {
    support_points: Matrix,
    coefficients: Vec<f64>,
    intercept: f64,
    kernel: KernelSpec,
}

impl DecisionFunction {
    /// Assemble a decision function directly. `coefficients.len()` must
    /// equal `support_points.rows()`.
    pub fn new(
        support_points: Matrix,
        coefficients: Vec<f64>,
        intercept: f64,
        kernel: KernelSpec,
    ) -> Result<Self, ProblemError> {
        if coefficients.len() != support_points.rows() {
            return Err(ProblemError::LengthMismatch {
                rows: support_points.rows(),
                labels: coefficients.len(),
                weights: coefficients.len(),
            });
        }
        kernel.validate()?;
        Ok(DecisionFunction {
            support_points,
            coefficients,
            intercept,
            kernel,
        })
    }

    pub fn support_count(&self) -> usize {
        self.support_points.rows()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    /// Evaluate `f(x)`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64, KernelError> {
        if self.support_points.rows() > 0 && x.len() != self.support_points.cols() {
            return Err(KernelError::DimensionMismatch {
                left: self.support_points.cols(),
                right: x.len(),
            });
        }
        let mut acc = self.intercept;
        for j in 0..self.support_points.rows() {
            acc += self.coefficients[j]
                * kernel_eval(&self.kernel, self.support_points.row(j), x)?;
        }
        Ok(acc)
    }
}

/// Errors during fitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitError {
    /// A kernel evaluation produced NaN (non-finite inputs upstream).
    NonFiniteKernel { row: usize, col: usize },
    /// Kernel argument error.
    Kernel(KernelError),
}

impl core::fmt::Display for FitError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            FitError::NonFiniteKernel { row, col } => {
                write!(f, "kernel value at ({row}, {col}) is not finite")
            }
            FitError::Kernel(e) => write!(f, "kernel: {e}"),
        }
    }
}

impl core::error::Error for FitError {}

impl From<KernelError> for FitError {
    fn from(e: KernelError) -> Self {
        FitError::Kernel(e)
    }
}

/// A fitted weighted SVM: the decision function plus the dual variables and
/// termination record.
#[derive(Debug, Clone, PartialEq)]
pub struct WsvmFit {
    pub decision: DecisionFunction,
    /// Dual variables for every training row (zeros included).
    pub alphas: Vec<f64>,
    pub info: SolveInfo,
}

/// Raw dual solution produced by [`solve_dual`].
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct DualSolution {
    pub alphas: Vec<f64>,
    pub intercept: f64,
    pub info: SolveInfo,
}

/// Two-variable working-set ascent on the dual, on a precomputed Gram
/// matrix. `caps` are the per-row boxes `C_i`; rows with `C_i = 0` are
/// inert. Deterministic: ties in pair selection break to the lowest index.
pub(crate) fn solve_dual(
    gram: &Matrix,
    labels: &[f64],
    caps: &[f64],
    opts: &SolverOptions,
) -> DualSolution {
    let n = labels.len();
    debug_assert_eq!(gram.rows(), n);
    debug_assert_eq!(gram.cols(), n);
    debug_assert_eq!(caps.len(), n);

    let mut alphas = vec![0.0f64; n];
    // F_i = h_i - y_i where h_i = sum_j alpha_j y_j K_ij; starts at -y_i.
    let mut f_vals: Vec<f64> = labels.iter().map(|&y| -y).collect();
    let mut pair_updates = 0u64;

    let (converged, violation) = loop {
        // Select the maximal violating pair:
        //   i = argmin over I_up of F, j = argmax over I_low of F,
        // where I_up = {y=+1, alpha<C} u {y=-1, alpha>0}
        //   and I_low = {y=-1, alpha<C} u {y=+1, alpha>0}.
        let mut i_up: Option<usize> = None;
        let mut j_low: Option<usize> = None;
        for r in 0..n {
            if caps[r] == 0.0 {
                continue;
            }
            let (y, a) = (labels[r], alphas[r]);
            let in_up = (y > 0.0 && a < caps[r]) || (y < 0.0 && a > 0.0);
            let in_low = (y < 0.0 && a < caps[r]) || (y > 0.0 && a > 0.0);
            if in_up && i_up.is_none_or(|b| f_vals[r] < f_vals[b]) {
                i_up = Some(r);
            }
            if in_low && j_low.is_none_or(|b| f_vals[r] > f_vals[b]) {
                j_low = Some(r);
            }
        }
        let (i, j) = match (i_up, j_low) {
            (Some(i), Some(j)) => (i, j),
            // One side empty: no feasible ascent direction remains.
            _ => break (true, 0.0),
        };
        let violation = f_vals[j] - f_vals[i];
        if violation <= opts.tol {
            break (true, violation);
        }
        if pair_updates >= opts.max_pair_updates {
            break (false, violation);
        }

        let quad = (gram.get(i, i) + gram.get(j, j) - 2.0 * gram.get(i, j)).max(1e-12);
        let (yi, yj) = (labels[i], labels[j]);
        let t_unc = violation / quad;
        let t_max_i = if yi > 0.0 { caps[i] - alphas[i] } else { alphas[i] };
        let t_max_j = if yj > 0.0 { alphas[j] } else { caps[j] - alphas[j] };
        let t = t_unc.min(t_max_i).min(t_max_j);
        if t <= 0.0 {
            // No progress possible (numerically stuck); stop without
            // claiming convergence.
            break (false, violation);
        }
        #[cfg(debug_assertions)]
        {
            // The dual objective gain t*(F_j - F_i) - t^2 quad / 2 must be
            // nonnegative: ascent is monotone.
            let gain = t * violation - 0.5 * t * t * quad;
            debug_assert!(gain >= 0.0, "dual objective decreased: gain = {gain}");
        }
        alphas[i] = (alphas[i] + yi * t).clamp(0.0, caps[i]);
        alphas[j] = (alphas[j] - yj * t).clamp(0.0, caps[j]);
        for b in 0..n {
            f_vals[b] += t * (gram.get(i, b) - gram.get(j, b));
        }
        pair_updates += 1;
    };

    let intercept = intercept_from(labels, caps, &alphas, &f_vals);
    DualSolution {
        alphas,
        intercept,
        info: SolveInfo {
            converged,
            pair_updates,
            violation,
        },
    }
}

/// Intercept from the KKT conditions: the mean of `y_i - h_i` over free
/// support vectors (`0 < alpha < C`), or the midpoint of the feasible
/// interval from the bound rows when no row is free.
fn intercept_from(labels: &[f64], caps: &[f64], alphas: &[f64], f_vals: &[f64]) -> f64 {
    let n = labels.len();
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut b_lo = f64::NEG_INFINITY;
    let mut b_hi = f64::INFINITY;
    for r in 0..n {
        if caps[r] == 0.0 {
            continue;
        }
        let (y, a) = (labels[r], alphas[r]);
        // y - h = -(F = h - y).
        let cand = -f_vals[r];
        if a > 0.0 && a < caps[r] {
            free_sum += cand;
            free_count += 1;
        } else if a <= 0.0 {
            // alpha = 0: y (h + b) >= 1.
            if y > 0.0 {
                b_lo = b_lo.max(cand);
            } else {
                b_hi = b_hi.min(cand);
            }
        } else {
            // alpha = C: y (h + b) <= 1.
            if y > 0.0 {
                b_hi = b_hi.min(cand);
            } else {
                b_lo = b_lo.max(cand);
            }
        }
    }
    if free_count > 0 {
        return free_sum / free_count as f64;
    }
    match (b_lo.is_finite(), b_hi.is_finite()) {
        (true, true) => (b_lo + b_hi) / 2.0,
        (true, false) => b_lo,
        (false, true) => b_hi,
        (false, false) => 0.0,
    }
}

fn check_gram_finite(gram: &Matrix) -> Result<(), FitError> {
    for i in 0..gram.rows() {
        for j in 0..gram.cols() {
            if !gram.get(i, j).is_finite() {
                return Err(FitError::NonFiniteKernel { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Build a [`DecisionFunction`] from a dual solution: support rows are those
/// with `alpha > 0`, with coefficients `beta_i = alpha_i y_i`.
pub(crate) fn decision_from_dual(
    features: &Matrix,
    labels: &[f64],
    alphas: &[f64],
    intercept: f64,
    kernel: KernelSpec,
) -> DecisionFunction {
    let support: Vec<usize> = (0..alphas.len()).filter(|&i| alphas[i] > 0.0).collect();
    let p = features.cols();
    let mut pts = Matrix::zeros(support.len(), p);
    let mut coef = Vec::with_capacity(support.len());
    for (m, &i) in support.iter().enumerate() {
        for c in 0..p {
            pts.set(m, c, features.get(i, c));
        }
        coef.push(alphas[i] * labels[i]);
    }
    DecisionFunction {
        support_points: pts,
        coefficients: coef,
        intercept,
        kernel,
    }
}

/// Fit the weighted SVM: Gram construction, dual ascent, intercept, and
/// support extraction.
pub fn fit_wsvm(
    problem: &WeightedClassificationProblem,
    opts: &SolverOptions,
) -> Result<WsvmFit, FitError> {
    let gram = gram_matrix(problem.kernel(), problem.features(), problem.features())?;
    check_gram_finite(&gram)?;
    let caps = problem.box_caps();
    let sol = solve_dual(&gram, problem.labels(), &caps, opts);
    let decision = decision_from_dual(
        problem.features(),
        problem.labels(),
        &sol.alphas,
        sol.intercept,
        *problem.kernel(),
    );
    Ok(WsvmFit {
        decision,
        alphas: sol.alphas,
        info: sol.info,
    })
}

/// Maximal KKT violation of dual variables for a problem, using the same
/// measure the solver terminates on (`max over I_low of F - min over I_up
/// of F`, clamped at zero; rows with `C_i = 0` are inert).
pub fn check_kkt(
    problem: &WeightedClassificationProblem,
    alphas: &[f64],
) -> Result<f64, FitError> {
    let gram = gram_matrix(problem.kernel(), problem.features(), problem.features())?;
    check_gram_finite(&gram)?;
    Ok(kkt_violation_from_parts(
        &gram,
        problem.labels(),
        &problem.box_caps(),
        alphas,
    ))
}

pub(crate) fn kkt_violation_from_parts(
    gram: &Matrix,
    labels: &[f64],
    caps: &[f64],
    alphas: &[f64],
) -> f64 {
    let n = labels.len();
    let mut min_up = f64::INFINITY;
    let mut max_low = f64::NEG_INFINITY;
    for r in 0..n {
        if caps[r] == 0.0 {
            continue;
        }
        let mut h = 0.0;
        for k in 0..n {
            h += alphas[k] * labels[k] * gram.get(k, r);
        }
        let f_r = h - labels[r];
        let (y, a) = (labels[r], alphas[r]);
        if (y > 0.0 && a < caps[r]) || (y < 0.0 && a > 0.0) {
            min_up = min_up.min(f_r);
        }
        if (y < 0.0 && a < caps[r]) || (y > 0.0 && a > 0.0) {
            max_low = max_low.max(f_r);
        }
    }
    if min_up.is_finite() && max_low.is_finite() {
        (max_low - min_up).max(0.0)
    } else {
        0.0
    }
}

/// Dual objective `W(alpha) = sum alpha - (1/2) sum_ij alpha_i alpha_j y_i
/// y_j K_ij`. The primal objective equals `2 lambda W` at the optimum.
pub fn dual_objective(
    problem: &WeightedClassificationProblem,
    alphas: &[f64],
) -> Result<f64, FitError> {
    let gram = gram_matrix(problem.kernel(), problem.features(), problem.features())?;
    check_gram_finite(&gram)?;
    Ok(dual_objective_from_parts(&gram, problem.labels(), alphas))
}

pub(crate) fn dual_objective_from_parts(gram: &Matrix, labels: &[f64], alphas: &[f64]) -> f64 {
    let n = labels.len();
    let mut lin = 0.0;
    let mut quad = 0.0;
    for i in 0..n {
        if alphas[i] == 0.0 {
            continue;
        }
        lin += alphas[i];
        for j in 0..n {
            if alphas[j] == 0.0 {
                continue;
            }
            quad += alphas[i] * alphas[j] * labels[i] * labels[j] * gram.get(i, j);
        }
    }
    lin - 0.5 * quad
}

/// Primal objective `(1/n) sum w_i psi(1, y_i f(x_i)) + lambda ||f||^2`
/// for the representer expansion induced by `alphas` (so
/// `||f||^2 = sum_ij beta_i beta_j K_ij`, intercept excluded).
pub fn primal_objective(
    problem: &WeightedClassificationProblem,
    alphas: &[f64],
    intercept: f64,
) -> Result<f64, FitError> {
    let gram = gram_matrix(problem.kernel(), problem.features(), problem.features())?;
    check_gram_finite(&gram)?;
    let n = problem.n();
    let labels = problem.labels();
    let mut norm2 = 0.0;
    let mut hinge = 0.0;
    for i in 0..n {
        let mut h = 0.0;
        for j in 0..n {
            h += alphas[j] * labels[j] * gram.get(j, i);
        }
        let fx = h + intercept;
        hinge += problem.weights()[i] * (1.0 - labels[i] * fx).max(0.0);
        if alphas[i] != 0.0 {
            for j in 0..n {
                if alphas[j] != 0.0 {
                    norm2 += alphas[i] * labels[i] * alphas[j] * labels[j] * gram.get(i, j);
                }
            }
        }
    }
    Ok(hinge / n as f64 + problem.lambda() * norm2)
}
