//! Carryover-effect estimation and testing for 2x2 crossover data.
//!
//! Under the crossover outcome model the period-2 outcome may carry a
//! residual effect `delta_{a1}(x)` of the period-1 treatment. The two-stage
//! estimator here:
//!
//! 1. regress `Y1` on `(X, A1)` to learn the carryover-free response
//!    surface `g(x, a)`;
//! 2. predict the carryover-free period-2 outcome `Y2_hat = g(X, -A1)`
//!    (period 2 receives the opposite treatment);
//! 3. regress the residual `Y2 - Y2_hat` on `(X, A1)`; that fit is
//!    `delta_hat_{A1}(X)`.
//!
//! The corrected within-subject reward is then
//! `R_hat = Y1 - (Y2 - delta_hat_{A1}(X))`.
//!
//! [`carryover_ttest`] tests the population nulls `E[delta_a(X)] = 0` for
//! each treatment `a`: randomization makes the covariate distribution equal
//! across sequence arms, so the mean carryover of treatment `+1` equals the
//! mean difference between the period-2 responses of the `A1 = +1` arm
//! (treatment `-1` after treatment `+1`) and the period-1 responses of the
//! `A1 = -1` arm (treatment `-1` fresh) — a two-sample comparison, tested
//! with Welch's t. Symmetrically for treatment `-1`.

use crate::data::{CrossoverDataset, Treatment};
use crate::forest::{fit_regressor, Regressor, RegressorError, RegressorSpec};
use crate::linalg::Matrix;
use crate::stats::{welch_t_test, StatsError, TTestResult};
use alloc::vec::Vec;

/// Anything that supplies a carryover effect `delta_{a1}(x)` — a fitted
/// [`CarryoverModel`], or a closed-form oracle in tests and simulations.
pub trait CarryoverEffect {
    /// The carryover that first-period treatment `a1` leaves on the
    /// period-2 outcome of a subject with covariates `x`.
    fn delta(&self, x: &[f64], a1: Treatment) -> f64;

    /// Covariate dimension the effect was built for, when known; used to
    /// reject mismatched data early.
    fn dim(&self) -> Option<usize> {
        None
    }
}

impl<F: Fn(&[f64], Treatment) -> f64> CarryoverEffect for F {
    fn delta(&self, x: &[f64], a1: Treatment) -> f64 {
        self(x, a1)
    }
}

/// The two fitted regressors of the carryover estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct CarryoverModel {
    g_hat: Regressor,
    d_hat: Regressor,
    spec: RegressorSpec,
    p: usize,
}

impl CarryoverModel {
    /// First-stage response surface `g_hat(x, a)`, the regression of `Y1`
    /// on `(X, A1)`.
    pub fn response(&self, x: &[f64], a: Treatment) -> f64 {
        self.g_hat.predict(&xa_row(x, a))
    }

    pub fn spec(&self) -> &RegressorSpec {
        &self.spec
    }
}

impl CarryoverEffect for CarryoverModel {
    fn delta(&self, x: &[f64], a1: Treatment) -> f64 {
        self.d_hat.predict(&xa_row(x, a1))
    }

    fn dim(&self) -> Option<usize> {
        Some(self.p)
    }
}

/// Errors from carryover estimation and testing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CarryoverError {
    /// Underlying regression failure.
    Regressor(RegressorError),
    /// The supplied effect was built for a different covariate dimension.
    DimensionMismatch { expected: usize, found: usize },
    /// A sequence arm has too few subjects for the Welch test.
    InsufficientArm { arm: Treatment, count: usize },
}

impl core::fmt::Display for CarryoverError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CarryoverError::Regressor(e) => write!(f, "regression: {e}"),
            CarryoverError::DimensionMismatch { expected, found } => {
                write!(f, "effect built for {expected} covariates, data has {found}")
            }
            CarryoverError::InsufficientArm { arm, count } => write!(
                f,
                "sequence arm a1 = {} has {count} subjects; the Welch test needs >= 2",
                arm.as_f64()
            ),
        }
    }
}

impl core::error::Error for CarryoverError {}

impl From<RegressorError> for CarryoverError {
    fn from(e: RegressorError) -> Self {
        CarryoverError::Regressor(e)
    }
}

/// Feature row `(x..., a)` shared by both regression stages.
fn xa_row(x: &[f64], a: Treatment) -> Vec<f64> {
    let mut row = Vec::with_capacity(x.len() + 1);
    row.extend_from_slice(x);
    row.push(a.as_f64());
    row
}

fn xa_features(data: &CrossoverDataset) -> Matrix {
    let n = data.n();
    let q = data.p() + 1;
    let mut m = Matrix::zeros(n, q);
    for (i, o) in data.observations().iter().enumerate() {
        for c in 0..data.p() {
            m.set(i, c, o.x[c]);
        }
        m.set(i, q - 1, o.a1.as_f64());
    }
    m
}

/// Fit the two-stage carryover estimator on a crossover dataset.
pub fn fit_carryover(
    data: &CrossoverDataset,
    spec: &RegressorSpec,
) -> Result<CarryoverModel, CarryoverError> {
    let feats = xa_features(data);
    let y1: Vec<f64> = data.observations().iter().map(|o| o.y1).collect();
    let g_hat = fit_regressor(spec, &feats, &y1)?;

    // Residual targets: Y2 minus the carryover-free prediction for the
    // period-2 treatment -A1.
    let resid: Vec<f64> = data
        .observations()
        .iter()
        .map(|o| {
            let y2_hat = g_hat.predict(&xa_row(&o.x, o.a1.flipped()));
            o.y2 - y2_hat
        })
        .collect();
    let d_hat = fit_regressor(spec, &feats, &resid)?;

    Ok(CarryoverModel {
        g_hat,
        d_hat,
        spec: *spec,
        p: data.p(),
    })
}

/// Corrected rewards `R_hat_i = y1_i - y2_i + delta(x_i, a1_i)`; with no
/// effect supplied, the uncorrected `y1_i - y2_i`.
pub fn corrected_rewards(
    data: &CrossoverDataset,
    effect: Option<&dyn CarryoverEffect>,
) -> Result<Vec<f64>, CarryoverError> {
    if let Some(e) = effect {
        if let Some(expected) = e.dim() {
            if expected != data.p() {
                return Err(CarryoverError::DimensionMismatch {
                    expected,
                    found: data.p(),
                });
            }
        }
    }
    Ok(data
        .observations()
        .iter()
        .map(|o| {
            let delta = effect.map_or(0.0, |e| e.delta(&o.x, o.a1));
            o.y1 - o.y2 + delta
        })
        .collect())
}

/// The two carryover tests, one per first-period treatment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarryoverTests {
    /// Test of `E[delta_{+1}(X)] = 0`: period-2 outcomes of the `a1 = +1`
    /// arm vs period-1 outcomes of the `a1 = -1` arm.
    pub treatment_plus: TTestResult,
    /// Test of `E[delta_{-1}(X)] = 0`: period-2 outcomes of the `a1 = -1`
    /// arm vs period-1 outcomes of the `a1 = +1` arm.
    pub treatment_minus: TTestResult,
}

/// Welch two-sample t-tests for nonzero mean carryover of each treatment.
pub fn carryover_ttest(data: &CrossoverDataset) -> Result<CarryoverTests, CarryoverError> {
    let mut y1_plus = Vec::new(); // Y1 of a1 = +1 arm
    let mut y2_plus = Vec::new(); // Y2 of a1 = +1 arm
    let mut y1_minus = Vec::new();
    let mut y2_minus = Vec::new();
    for o in data.observations() {
        match o.a1 {
            Treatment::Plus => {
                y1_plus.push(o.y1);
                y2_plus.push(o.y2);
            }
            Treatment::Minus => {
                y1_minus.push(o.y1);
                y2_minus.push(o.y2);
            }
        }
    }
    for (arm, count) in [
        (Treatment::Plus, y1_plus.len()),
        (Treatment::Minus, y1_minus.len()),
    ] {
        if count < 2 {
            return Err(CarryoverError::InsufficientArm { arm, count });
        }
    }
    let to_err = |_: StatsError| CarryoverError::InsufficientArm {
        arm: Treatment::Plus,
        count: 0,
    };
    // Both compared samples are responses to the same treatment, differing
    // only in whether the other treatment preceded them.
    let treatment_plus = welch_t_test(&y2_plus, &y1_minus).map_err(to_err)?;
    let treatment_minus = welch_t_test(&y2_minus, &y1_plus).map_err(to_err)?;
    Ok(CarryoverTests {
        treatment_plus,
        treatment_minus,
    })
}
