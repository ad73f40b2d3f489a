//! Monte Carlo behavior of the two-stage carryover estimator and the
//! carryover t-tests on simulated crossover data.
//!
//! Every test below runs on fixed seeds, so the asserted quantities are
//! deterministic. Thresholds were frozen from a pilot run of the `pilot_stats`
//! helper (`--ignored --nocapture`); the observed values are recorded next to
//! each assertion.

use crossgowl_core::carryover::{carryover_ttest, fit_carryover, CarryoverEffect};
use crossgowl_core::forest::RegressorSpec;
use crossgowl_core::rng::substream;
use crossgowl_core::simulation::{gen_covariates, gen_crossover_dataset, ScenarioSpec};
use crossgowl_core::Treatment;

const MASTER: u64 = 0x5eed_ca11_0367;

/// Mean |delta_hat| over a fresh grid of `n_grid` points, both arms pooled.
fn mean_abs_delta(model: &dyn CarryoverEffect, grid: &[Vec<f64>]) -> f64 {
    let mut acc = 0.0;
    for x in grid {
        acc += model.delta(x, Treatment::Plus).abs();
        acc += model.delta(x, Treatment::Minus).abs();
    }
    acc / (2.0 * grid.len() as f64)
}

/// Mean squared error of `delta_hat` against the true scenario carryover,
/// both arms pooled, over a fresh grid.
fn delta_mse(model: &dyn CarryoverEffect, truth: &ScenarioSpec, grid: &[Vec<f64>]) -> f64 {
    let mut acc = 0.0;
    for x in grid {
        for a in [Treatment::Plus, Treatment::Minus] {
            let err = model.delta(x, a) - truth.delta(x, a);
            acc += err * err;
        }
    }
    acc / (2.0 * grid.len() as f64)
}

fn fresh_grid(n: usize, p: usize, stream: u64) -> Vec<Vec<f64>> {
    let mut rng = substream(MASTER, stream);
    let m = gen_covariates(n, p, &mut rng);
    (0..n).map(|i| m.row(i).to_vec()).collect()
}

/// Per-seed mean |delta_hat| when the generating process has no carryover.
fn spurious_delta_by_seed(seeds: core::ops::Range<u64>) -> Vec<f64> {
    let spec = ScenarioSpec::new(1).unwrap();
    let grid = fresh_grid(2_000, spec.p(), 1);
    seeds
        .map(|s| {
            let mut rng = substream(MASTER, 100 + s);
            let data = gen_crossover_dataset(&spec, 600, &mut rng);
            let model = fit_carryover(&data, &RegressorSpec::forest_with_seed(200 + s)).unwrap();
            mean_abs_delta(&model, &grid)
        })
        .collect()
}

/// Paired (n = 75, n = 600) delta MSEs on Scenario 3 for each seed.
fn scenario3_mse_pairs(seeds: core::ops::Range<u64>) -> Vec<(f64, f64)> {
    let spec = ScenarioSpec::new(3).unwrap();
    let grid = fresh_grid(10_000, spec.p(), 2);
    seeds
        .map(|s| {
            let pair: Vec<f64> = [75usize, 600]
                .iter()
                .map(|&n| {
                    let mut rng = substream(MASTER, 300 + s);
                    let data = gen_crossover_dataset(&spec, n, &mut rng);
                    let model =
                        fit_carryover(&data, &RegressorSpec::forest_with_seed(400 + s)).unwrap();
                    delta_mse(&model, &spec, &grid)
                })
                .collect();
            (pair[0], pair[1])
        })
        .collect()
}

/// Number of seeds (out of the range) on which at least one of the two
/// carryover tests rejects at level `alpha`.
fn rejection_count(scenario: u8, n: usize, alpha: f64, seeds: core::ops::Range<u64>) -> usize {
    let spec = ScenarioSpec::new(scenario).unwrap();
    seeds
        .filter(|&s| {
            let mut rng = substream(MASTER, 500 + u64::from(scenario) * 1_000 + s);
            let data = gen_crossover_dataset(&spec, n, &mut rng);
            let tests = carryover_ttest(&data).unwrap();
            tests.treatment_plus.p < alpha || tests.treatment_minus.p < alpha
        })
        .count()
}

#[test]
#[ignore = "pilot helper: prints the statistics the real tests assert"]
fn pilot_stats() {
    let mut spurious = spurious_delta_by_seed(0..20);
    spurious.sort_by(f64::total_cmp);
    println!("spurious mean|delta_hat| sorted: {spurious:?}");

    let pairs = scenario3_mse_pairs(0..10);
    let mean75 = pairs.iter().map(|p| p.0).sum::<f64>() / pairs.len() as f64;
    let mean600 = pairs.iter().map(|p| p.1).sum::<f64>() / pairs.len() as f64;
    println!("scenario 3 delta MSE pairs (n=75, n=600): {pairs:?}");
    println!("means: n=75 {mean75:.4}  n=600 {mean600:.4}");

    let power = rejection_count(4, 600, 0.05, 0..100);
    println!("scenario 4 rejections at 0.05 over 100 seeds: {power}");

    let null_rej = rejection_count(1, 200, 0.05, 0..100);
    println!("scenario 1 (null) rejections at 0.05 over 100 seeds: {null_rej}");
}

#[test]
fn spurious_carryover_is_small_when_delta_is_zero() {
    // Scenario 1 has no carryover, so delta_hat measures pure estimation
    // noise from the two-stage fit at n = 600 with p = 50 covariates. Pilot
    // over these 20 seeds: min 0.166, median ~0.221, 95th percentile (19th
    // of 20 sorted) 0.2895, max 0.3018. The asserted bound leaves headroom
    // above the observed 95th percentile while staying well below the size
    // of the real effects the estimator must detect (Scenario 3/4
    // carryovers are O(1); Scenario 4 has mean carryover 2/3).
    let spurious = spurious_delta_by_seed(0..20);
    let mut sorted = spurious.clone();
    sorted.sort_by(f64::total_cmp);
    let p95 = sorted[18];
    assert!(
        p95 <= 0.35,
        "95th percentile of spurious mean|delta_hat| too large: {p95} ({sorted:?})"
    );
}

#[test]
fn scenario3_delta_mse_improves_with_sample_size() {
    // Same seeds at both sample sizes; the estimator sees eight times the
    // data at n = 600 and must track the true Scenario-3 carryover strictly
    // better. Pilot means over 10 seeds: n=75 0.477, n=600 0.268, with every
    // individual pair improving.
    let pairs = scenario3_mse_pairs(0..10);
    let mean75 = pairs.iter().map(|p| p.0).sum::<f64>() / pairs.len() as f64;
    let mean600 = pairs.iter().map(|p| p.1).sum::<f64>() / pairs.len() as f64;
    assert!(
        mean600 < mean75,
        "delta MSE did not improve: n=600 {mean600} vs n=75 {mean75} ({pairs:?})"
    );
}

#[test]
fn scenario4_carryover_test_has_power() {
    // Scenario 4 has E[delta_plus(X)] = 1 - 2 E[X1] - E[X2^2] = 2/3 under
    // uniform(-1, 1) covariates, so the treatment-plus test faces a real
    // mean shift at n = 600. Pilot: 99 of 100 seeds rejected.
    let hits = rejection_count(4, 600, 0.05, 0..100);
    assert!(
        hits >= 90,
        "carryover test rejected on only {hits}/100 scenario-4 seeds"
    );
}

#[test]
fn no_carryover_data_rarely_rejects() {
    // Scenario 1 satisfies both null hypotheses, so rejections at level 0.05
    // should stay near the nominal union rate (at most ~10% for two tests).
    // Pilot: 9 of 100 seeds rejected.
    let rejections = rejection_count(1, 200, 0.05, 0..100);
    assert!(
        rejections <= 20,
        "null carryover test rejected on {rejections}/100 scenario-1 seeds"
    );
}
