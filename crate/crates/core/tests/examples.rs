//! Simulation-oracle checks of the documented behaviour of each module.

use rand_distr::{Distribution as _, StandardNormal};
use rayon::prelude::*;

use crosscal::cep::cep_pointwise;
use crosscal::diagnostics::{
    conditional_pit_histogram, default_marginal_grid, marginal_cross_calibration_curve, Binning, Conditioning,
    Interval,
};
use crosscal::gof::{ad_test_std_normal, ks_test_uniform, ks_uniform_statistic};
use crosscal::mct::mct_grid_sweep;
use crosscal::rng::{self, derive_seed};
use crosscal::scenarios::{simulate, ScenarioName, ScenarioSpec};

fn sim(name: ScenarioName, n: usize, seed: u64) -> crosscal::PredictionDataset {
    simulate(&ScenarioSpec { name, n, seed }).unwrap()
}

fn share(hits: usize, total: usize) -> f64 {
    hits as f64 / total as f64
}

#[test]
fn anderson_darling_level_on_normal_samples() {
    let reps = 2000;
    let rejections: usize = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(derive_seed(5, &[r as u64]), 0);
            let x: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut g)).collect();
            (ad_test_std_normal(&x).unwrap().p_value <= 0.05) as usize
        })
        .sum();
    let rate = share(rejections, reps);
    assert!((0.03..=0.07).contains(&rate), "rate {rate}");
}

#[test]
fn ideal_forecaster_pits_are_uniform() {
    let reps = 500;
    let n = 10_000;
    let bound = 1.63 / (n as f64).sqrt();
    let inside: usize = (0..reps)
        .into_par_iter()
        .map(|r| {
            let ds = sim(ScenarioName::Gr2013, n, derive_seed(6, &[r as u64]));
            (ks_uniform_statistic(&ds.pit_series(0).unwrap().values) < bound) as usize
        })
        .sum();
    assert!(share(inside, reps) >= 0.98, "{inside}/{reps}");
}

#[test]
fn student_forecaster_is_ideal_in_tdf() {
    let reps = 100;
    let accepted: usize = (0..reps)
        .into_par_iter()
        .map(|r| {
            let ds = sim(ScenarioName::Tdf, 100_000, derive_seed(7, &[r as u64]));
            (ks_test_uniform(&ds.pit_series(1).unwrap().values).unwrap().p_value > 0.01) as usize
        })
        .sum();
    assert!(share(accepted, reps) >= 0.95, "{accepted}/{reps}");
}

#[test]
fn marginal_curve_separates_ideal_and_climatological() {
    let ds = sim(ScenarioName::Gr2013, 100_000, 8);
    let grid = default_marginal_grid(&ds);
    let same = marginal_cross_calibration_curve(&ds, 0, 0, &grid).unwrap();
    assert!(same.sup_abs() < 0.01, "{}", same.sup_abs());
    let clim = marginal_cross_calibration_curve(&ds, 1, 0, &grid).unwrap();
    assert!(clim.sup_abs() > 0.05, "{}", clim.sup_abs());
}

#[test]
fn conditional_histograms_in_tdf() {
    const CHI2_9_999: f64 = 27.877_164_871_256_568;
    let reps = 200;
    let by_df = Binning::Intervals(vec![
        Interval::left_open(5.0, 10.0),
        Interval::left_open(10.0, 15.0),
        Interval::left_open(15.0, 20.0),
    ]);
    let by_sd = Binning::Intervals(vec![
        Interval::closed(0.0, 0.95),
        Interval::left_open(0.95, 1.1),
        Interval::left_open(1.1, f64::INFINITY),
    ]);
    let (ok_bins, total_bins, detected) = (0..reps)
        .into_par_iter()
        .map(|r| {
            let ds = sim(ScenarioName::Tdf, 10_000, derive_seed(9, &[r as u64]));
            // the normal forecaster is cross-ideal given the Student-t df
            let h = conditional_pit_histogram(
                &ds,
                0,
                Conditioning::Parameter { forecaster: 1, param: 0 },
                &by_df,
                10,
            )
            .unwrap();
            let ok = h.bins.iter().filter(|b| b.chi_square.unwrap() < CHI2_9_999).count();
            // the Student-t forecaster is not cross-calibrated given the normal sd
            let h = conditional_pit_histogram(&ds, 1, Conditioning::PredictiveSd { forecaster: 0 }, &by_sd, 10)
                .unwrap();
            let hit = h.bins.iter().any(|b| b.p_value.is_some_and(|p| p < 0.001));
            (ok, h.bins.len(), hit as usize)
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    assert!(share(ok_bins, total_bins) >= 0.99, "{ok_bins}/{total_bins}");
    assert!(share(detected, reps) >= 0.95, "{detected}/{reps}");
}

#[test]
fn pointwise_cep_level_for_ideal_forecaster() {
    let reps = 2000;
    for z in [0.25, 0.5, 0.8] {
        let rejections: usize = (0..reps)
            .into_par_iter()
            .map(|r| {
                let ds = sim(ScenarioName::Gr2013, 200, derive_seed(10, &[r as u64]));
                (cep_pointwise(&ds, 0, &[], z).unwrap().p_raw <= 0.05) as usize
            })
            .sum();
        let rate = share(rejections, reps);
        assert!((0.03..=0.07).contains(&rate), "z={z}: rate {rate}");
    }
}

#[test]
fn mct_p_values_swing_with_grid_size() {
    // unfocused vs sign-reversed; seed 6 (spread 0.92) picked from a scan of
    // seeds 0..20, 16 of which exceed 0.5
    let ds = sim(ScenarioName::Gr2013, 500, 6);
    let sweep = mct_grid_sweep(&ds, 2, 3, 2..=30);
    let p: Vec<f64> = sweep.iter().filter_map(|s| s.p_value).collect();
    assert!(p.len() >= 20);
    let spread = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - p.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread > 0.5, "spread {spread}");
}
