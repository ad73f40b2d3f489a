//! Estimation of individualized treatment regimes (ITRs) from 2x2 crossover
//! trial data via outcome-weighted learning on within-subject treatment
//! response differences, with carryover-effect correction.
//!
//! The crate is `no_std` + `alloc`: everything here is pure computation over
//! in-memory data. File formats, CSV ingestion, and the command-line front end
//! live in the companion `crossgowl` crate.
//!
//! Main entry points:
//!
//! * [`regimes::fit_crossover_gowl`] — the crossover estimator: builds the
//!   reward `R = Y1 - (Y2 - delta)` per subject, folds its sign into the
//!   classification label, and solves a weighted kernel SVM with
//!   cross-validated `(lambda, sigma)`.
//! * [`regimes::fit_parallel_owl`], [`regimes::fit_parallel_gowl`],
//!   [`regimes::fit_ridge_regime`] — parallel-design baselines.
//! * [`carryover::fit_carryover`] — the two-stage regression estimator for
//!   the carryover effect `delta_{A1}(X)`.
//! * [`simulation::run_experiment`] — replicated benchmark sweeps over the
//!   four built-in data-generating scenarios.
//!
//! # Example
//!
//! Fit a regime on a toy trial where treatment `+1` is better exactly when
//! the covariate is positive, then recommend for new subjects:
//!
//! ```
//! use crossgowl_core::data::{CrossoverDataset, CrossoverObservation, Treatment};
//! use crossgowl_core::regimes::{fit_crossover_gowl, CarryoverMode, HyperGrid};
//!
//! // Period outcomes favor whichever period matched sign(x): the
//! // within-subject difference y1 - y2 is +2 when the period-1 treatment
//! // was the right one and -2 otherwise.
//! let rows: Vec<CrossoverObservation> = (0..40)
//!     .map(|i| {
//!         let x = (i as f64 - 19.5) / 20.0;
//!         let a1 = if i % 2 == 0 { Treatment::Plus } else { Treatment::Minus };
//!         let right = a1.as_f64() * x > 0.0;
//!         let (y1, y2) = if right { (1.0, -1.0) } else { (-1.0, 1.0) };
//!         CrossoverObservation { x: vec![x], a1, y1, y2, propensity: 0.5 }
//!     })
//!     .collect();
//! let data = CrossoverDataset::new(rows).unwrap();
//!
//! let grid = HyperGrid { lambdas: vec![0.01, 0.1], sigmas: vec![0.5, 1.0], folds: 2 };
//! let model = fit_crossover_gowl(&data, &grid, CarryoverMode::None, 7).unwrap();
//!
//! assert_eq!(model.recommend(&[0.8]).unwrap(), Treatment::Plus);
//! assert_eq!(model.recommend(&[-0.8]).unwrap(), Treatment::Minus);
//! ```

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod carryover;
pub mod data;
pub mod evaluation;
pub mod forest;
pub mod kernels;
pub mod linalg;
pub mod regimes;
pub mod rng;
pub mod simulation;
pub mod stats;
pub mod wsvm;

pub use data::{CrossoverDataset, CrossoverObservation, ParallelDataset, ParallelObservation, Treatment};
pub use kernels::KernelSpec;
pub use regimes::{CarryoverMode, HyperGrid, Method, OwlShift, RegimeModel};
pub use wsvm::{DecisionFunction, WeightedClassificationProblem};
