//! Regime evaluation metrics.
//!
//! * [`estimated_value`] — inverse-propensity-weighted value of a regime on
//!   parallel-design data: the average outcome among subjects whose observed
//!   treatment matches the recommendation, reweighted by propensity.
//! * [`misclassification_rate`] — disagreement with a reference rule on a
//!   test covariate set.
//! * [`value_mse`] — mean squared error between per-replication estimated
//!   and optimal values.
//! * [`crossover_cv_value`] — the crossover cross-validated value: each
//!   held-out subject contributes the outcome of the period in which they
//!   received the recommended treatment (exactly one period qualifies,
//!   since the two periods use opposite treatments).

// Needed for f64 math in no_std builds; in builds where a dependency
// links std, the inherent methods shadow the trait and this goes unused.
#[allow(unused_imports)]
use num_traits::Float;
use crate::data::{CrossoverDataset, ParallelDataset, SplitError, Treatment};
use crate::data::split_folds;
use alloc::vec::Vec;

/// Errors from the scalar metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalError {
    /// No subject's observed treatment agrees with the recommendation: the
    /// inverse-propensity value estimator is undefined (0/0).
    NoAgreement,
    /// Paired lists of different lengths.
    LengthMismatch { left: usize, right: usize },
    /// Empty test set.
    Empty,
}

impl core::fmt::Display for EvalError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EvalError::NoAgreement => write!(
                f,
                "no subject received their recommended treatment; value undefined"
            ),
            EvalError::LengthMismatch { left, right } => {
                write!(f, "lists have lengths {left} and {right}")
            }
            EvalError::Empty => write!(f, "empty input"),
        }
    }
}

impl core::error::Error for EvalError {}

/// Inverse-propensity-weighted value of `policy` on parallel data:
///
/// ```text
/// sum_i y_i 1{a_i = policy(x_i)} / pi_i
/// -------------------------------------
/// sum_i     1{a_i = policy(x_i)} / pi_i
/// ```
pub fn estimated_value<F>(data: &ParallelDataset, mut policy: F) -> Result<f64, EvalError>
where
    F: FnMut(&[f64]) -> Treatment,
{
    let mut num = 0.0;
    let mut den = 0.0;
    for o in data.observations() {
        if o.a == policy(&o.x) {
            num += o.y / o.propensity;
            den += 1.0 / o.propensity;
        }
    }
    if den == 0.0 {
        return Err(EvalError::NoAgreement);
    }
    Ok(num / den)
}

/// Fraction of `covariate_rows` on which `policy` and `reference` disagree.
pub fn misclassification_rate<F, G>(
    covariate_rows: &[Vec<f64>],
    mut policy: F,
    mut reference: G,
) -> Result<f64, EvalError>
where
    F: FnMut(&[f64]) -> Treatment,
    G: FnMut(&[f64]) -> Treatment,
{
    if covariate_rows.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut disagree = 0usize;
    for x in covariate_rows {
        if policy(x) != reference(x) {
            disagree += 1;
        }
    }
    Ok(disagree as f64 / covariate_rows.len() as f64)
}

/// Mean of squared differences between per-replication estimated values and
/// the matching optimal values.
pub fn value_mse(estimated: &[f64], optimal: &[f64]) -> Result<f64, EvalError> {
    if estimated.len() != optimal.len() {
        return Err(EvalError::LengthMismatch {
            left: estimated.len(),
            right: optimal.len(),
        });
    }
    if estimated.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut acc = 0.0;
    for (e, o) in estimated.iter().zip(optimal) {
        let d = e - o;
        acc += d * d;
    }
    Ok(acc / estimated.len() as f64)
}

/// Per-fold means and their across-fold summary from
/// [`crossover_cv_value`].
#[derive(Debug, Clone, PartialEq)]
pub struct CvValue {
    /// Mean of the fold values.
    pub mean: f64,
    /// Sample standard deviation (denominator `k - 1`) of the fold values.
    pub sd: f64,
    /// One value per fold, in fold order.
    pub fold_values: Vec<f64>,
}

/// Errors from [`crossover_cv_value`].
#[derive(Debug, Clone, PartialEq)]
pub enum CvValueError<E> {
    /// Fold construction failed.
    Split(SplitError),
    /// The fitter failed on a training fold.
    Fit { fold: usize, source: E },
}

impl<E: core::fmt::Display> core::fmt::Display for CvValueError<E> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CvValueError::Split(e) => write!(f, "fold split: {e}"),
            CvValueError::Fit { fold, source } => {
                write!(f, "fitting with fold {fold} held out: {source}")
            }
        }
    }
}

impl<E: core::fmt::Debug + core::fmt::Display> core::error::Error for CvValueError<E> {}

/// Cross-validated value of a regime fitter on crossover data.
///
/// For each of `folds` splits (unstratified, deterministic in `seed`), the
/// fitter trains on the remaining folds; each held-out subject then
/// contributes `y1` if the recommendation matches their period-1 treatment
/// and `y2` otherwise (the period-2 treatment is the opposite, so exactly
/// one period matches). The fold value is the held-out mean.
pub fn crossover_cv_value<P, E, F>(
    data: &CrossoverDataset,
    mut fit: F,
    folds: usize,
    seed: u64,
) -> Result<CvValue, CvValueError<E>>
where
    F: FnMut(&CrossoverDataset) -> Result<P, E>,
    P: FnMut(&[f64]) -> Treatment,
{
    let n = data.n();
    let split = split_folds(n, folds, None, seed).map_err(CvValueError::Split)?;
    let mut fold_values = Vec::with_capacity(folds);
    for (fold_idx, fold) in split.folds.iter().enumerate() {
        let train_rows: Vec<usize> = (0..n).filter(|i| !fold.contains(i)).collect();
        let train = data.subset(&train_rows);
        let mut policy = fit(&train).map_err(|source| CvValueError::Fit {
            fold: fold_idx,
            source,
        })?;
        let mut acc = 0.0;
        for &i in fold {
            let o = &data.observations()[i];
            let rec = policy(&o.x);
            acc += if rec == o.a1 { o.y1 } else { o.y2 };
        }
        fold_values.push(acc / fold.len() as f64);
    }
    let k = fold_values.len() as f64;
    let mean = fold_values.iter().sum::<f64>() / k;
    let var = fold_values
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / (k - 1.0);
    Ok(CvValue {
        mean,
        sd: var.sqrt(),
        fold_values,
    })
}
