//! Calibration pilots: ignored by default, run on demand with
//! `cargo test -p crossgowl-core --test pilot -- --ignored --nocapture`.
//! These print the Monte Carlo numbers behind thresholds frozen into the
//! regular test suites; they assert nothing beyond finiteness.

use crossgowl_core::forest::{fit_regressor, ForestParams, RegressorSpec};
use crossgowl_core::linalg::Matrix;
use crossgowl_core::rng::{substream, uniform_open_pm1};

#[test]
#[ignore]
fn forest_identity_rmse_vs_nearest_neighbor() {
    let mut rng = substream(31, 0);
    let n = 500;
    let mut xs = Vec::with_capacity(n);
    for _ in 0..n {
        xs.push(uniform_open_pm1(&mut rng));
    }
    let targets: Vec<f64> = xs.clone();
    let feats = Matrix::from_rows(n, 1, xs.clone());
    let spec = RegressorSpec::Forest(ForestParams {
        trees: 200,
        seed: 11,
        ..ForestParams::default()
    });
    let m = fit_regressor(&spec, &feats, &targets).unwrap();

    let mut forest_sse = 0.0;
    let mut nn_sse = 0.0;
    let n_test = 400;
    for k in 0..n_test {
        let x = -0.8 + 1.6 * (k as f64 + 0.5) / n_test as f64;
        let pred = m.predict(&[x]);
        forest_sse += (pred - x) * (pred - x);
        let mut best = f64::INFINITY;
        let mut best_y = 0.0;
        for (&xi, &yi) in xs.iter().zip(&targets) {
            let d = (xi - x).abs();
            if d < best {
                best = d;
                best_y = yi;
            }
        }
        nn_sse += (best_y - x) * (best_y - x);
    }
    let forest_rmse = (forest_sse / n_test as f64).sqrt();
    let nn_rmse = (nn_sse / n_test as f64).sqrt();
    println!("forest RMSE = {forest_rmse:.6}, 1-NN RMSE = {nn_rmse:.6}");
    assert!(forest_rmse.is_finite() && nn_rmse.is_finite());
}

#[test]
#[ignore]
fn time_default_grid_fits_by_sample_size() {
    use crossgowl_core::regimes::{fit_crossover_gowl, CarryoverMode, HyperGrid};
    use crossgowl_core::simulation::{gen_crossover_dataset, ScenarioSpec};
    use std::time::Instant;

    let spec = ScenarioSpec::new(1).unwrap(); // p = 50
    for (i, n) in [30usize, 75, 150, 300].into_iter().enumerate() {
        let mut rng = substream(100, i as u64);
        let data = gen_crossover_dataset(&spec, n, &mut rng);
        let grid = HyperGrid::defaults_for(n);
        let t0 = Instant::now();
        let model = fit_crossover_gowl(&data, &grid, CarryoverMode::None, 7).unwrap();
        println!(
            "n = {n}: {:.2?} (converged = {}, warnings = {:?})",
            t0.elapsed(),
            model.converged(),
            model.diagnostics().warnings.len()
        );
    }
}

#[test]
#[ignore]
fn time_n600_fit_and_forest() {
    use crossgowl_core::carryover::fit_carryover;
    use crossgowl_core::regimes::{fit_crossover_gowl, CarryoverMode, HyperGrid};
    use crossgowl_core::simulation::{gen_crossover_dataset, ScenarioSpec};
    use std::time::Instant;

    let spec = ScenarioSpec::new(3).unwrap();
    let mut rng = substream(101, 0);
    let data = gen_crossover_dataset(&spec, 600, &mut rng);

    let t0 = Instant::now();
    let fspec = RegressorSpec::forest_with_seed(5);
    let m = fit_carryover(&data, &fspec).unwrap();
    println!("fit_carryover n=600: {:.2?}", t0.elapsed());
    let t0 = Instant::now();
    let mut acc = 0.0;
    for i in 0..10_000 {
        let x = vec![(i % 100) as f64 / 50.0 - 1.0; 51];
        acc += m.response(&x[..50], crossgowl_core::Treatment::Plus);
    }
    println!("10k predictions: {:.2?} (sink {acc:.3})", t0.elapsed());

    let grid = HyperGrid::defaults_for(600);
    let t0 = Instant::now();
    let model = fit_crossover_gowl(&data, &grid, CarryoverMode::None, 7).unwrap();
    println!(
        "crossover fit n=600 (no carryover): {:.2?} converged={}",
        t0.elapsed(),
        model.converged()
    );
    let t0 = Instant::now();
    let model = fit_crossover_gowl(&data, &grid, CarryoverMode::Estimate(fspec), 7).unwrap();
    println!(
        "crossover fit n=600 (estimate): {:.2?} converged={}",
        t0.elapsed(),
        model.converged()
    );
}
