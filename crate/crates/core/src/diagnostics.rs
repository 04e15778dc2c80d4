//! Plot data for cross-calibration diagnostics.
//!
//! The marginal curve compares forecaster `j`'s average predictive CDF with
//! the empirical frequency of `F_j⁻¹(Z_i) ≤ y`; a flat zero curve is what
//! cross-calibration predicts. Conditional PIT histograms split forecaster
//! `i`'s PITs by a predictive quantity of some forecaster.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::PredictionDataset;
use crate::error::{Error, Result};
use crate::gof::chi_square_uniform;

/// Number of points of the default marginal grid.
pub const DEFAULT_GRID_POINTS: usize = 201;
/// Default number of PIT cells per histogram.
pub const DEFAULT_CELLS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalCurve {
    pub tested: usize,
    pub reference: usize,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl MarginalCurve {
    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `y,delta` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("y,delta\n");
        for (y, d) in self.grid.iter().zip(&self.values) {
            let _ = writeln!(out, "{y},{d}");
        }
        out
    }
}

/// 201 equally spaced points over `[min y - sd(y), max y + sd(y)]`.
pub fn default_marginal_grid(ds: &PredictionDataset) -> Vec<f64> {
    let y = ds.y();
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sd = if y.len() > 1 {
        (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let sd = if sd > 0.0 { sd } else { 1.0 };
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min) - sd;
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max) + sd;
    let step = (hi - lo) / (DEFAULT_GRID_POINTS - 1) as f64;
    (0..DEFAULT_GRID_POINTS)
        .map(|k| if k + 1 == DEFAULT_GRID_POINTS { hi } else { lo + step * k as f64 })
        .collect()
}

/// `Δ(y) = mean_t F_{j,t}(y) - mean_t 1{z_{i,t} ≤ F_{j,t}(y)}` on `grid`.
pub fn marginal_cross_calibration_curve(
    ds: &PredictionDataset,
    i: usize,
    j: usize,
    grid: &[f64],
) -> Result<MarginalCurve> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty grid".into()));
    }
    if grid.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite);
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("grid must be strictly increasing".into()));
    }
    let z = ds.pit_series(i)?.values;
    let fj = ds.forecaster(j)?.forecasts();
    let n = ds.n() as f64;
    let values = grid
        .iter()
        .map(|&y| {
            let mut acc = 0.0;
            for (d, &zt) in fj.iter().zip(&z) {
                let c = d.cdf(y);
                acc += c - if zt <= c { 1.0 } else { 0.0 };
            }
            acc / n
        })
        .collect();
    Ok(MarginalCurve {
        tested: i,
        reference: j,
        grid: grid.to_vec(),
        values,
    })
}

/// Quantity used to sort rows into bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Conditioning {
    /// Parameter number `param` (0-based) of a forecaster.
    Parameter { forecaster: usize, param: usize },
    /// Predictive standard deviation of a forecaster.
    PredictiveSd { forecaster: usize },
}

/// Interval `(lo, hi]`, or `[lo, hi]` when `closed_lo`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub closed_lo: bool,
}

impl Interval {
    pub fn left_open(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, closed_lo: false }
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, closed_lo: true }
    }

    pub fn contains(&self, x: f64) -> bool {
        (x > self.lo || (self.closed_lo && x == self.lo)) && x <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Binning {
    Intervals(Vec<Interval>),
    /// Bins with (roughly) equal numbers of rows.
    EqualCount(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitBin {
    pub interval: Interval,
    pub count: u64,
    pub cells: Vec<u64>,
    /// Chi-square uniformity test of the cells; absent for empty bins.
    pub chi_square: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalPitHistogram {
    pub tested: usize,
    pub conditioning: Conditioning,
    pub bins: Vec<PitBin>,
    /// Rows whose conditioning value lies in no bin.
    pub unbinned: u64,
}

impl ConditionalPitHistogram {
    /// `bin,lo,hi,cell,count` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin,lo,hi,cell,count\n");
        for (b, bin) in self.bins.iter().enumerate() {
            for (c, n) in bin.cells.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{},{}", b + 1, bin.interval.lo, bin.interval.hi, c + 1, n);
            }
        }
        out
    }
}

/// Conditioning values per row.
pub fn conditioning_values(ds: &PredictionDataset, cond: Conditioning) -> Result<Vec<f64>> {
    match cond {
        Conditioning::Parameter { forecaster, param } => {
            let f = ds.forecaster(forecaster)?;
            if param >= f.family().arity() {
                return Err(Error::IndexOutOfRange { index: param, count: f.family().arity() });
            }
            Ok(f.param_column(param))
        }
        Conditioning::PredictiveSd { forecaster } => {
            let f = ds.forecaster(forecaster)?;
            f.forecasts()
                .iter()
                .map(|d| {
                    d.std_dev().ok_or_else(|| {
                        Error::InvalidParameter(format!("forecaster {} has no finite sd", f.label()))
                    })
                })
                .collect()
        }
    }
}

/// Equal-count bins from the empirical quantiles of `values`.
pub fn equal_count_intervals(values: &[f64], bins: usize) -> Result<Vec<Interval>> {
    if bins == 0 {
        return Err(Error::InvalidParameter("at least one bin is required".into()));
    }
    if values.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut edges = vec![sorted[0]];
    for b in 1..bins {
        let e = sorted[(b * n / bins).saturating_sub(1)];
        if e > *edges.last().unwrap() {
            edges.push(e);
        }
    }
    if sorted[n - 1] > *edges.last().unwrap() || edges.len() == 1 {
        edges.push(sorted[n - 1]);
    }
    Ok(edges
        .windows(2)
        .enumerate()
        .map(|(k, w)| Interval { lo: w[0], hi: w[1], closed_lo: k == 0 })
        .collect())
}

/// PIT histograms of forecaster `i` within each conditioning bin.
pub fn conditional_pit_histogram(
    ds: &PredictionDataset,
    i: usize,
    cond: Conditioning,
    binning: &Binning,
    cells: usize,
) -> Result<ConditionalPitHistogram> {
    if cells < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 PIT cells, got {cells}")));
    }
    let z = ds.pit_series(i)?.values;
    let x = conditioning_values(ds, cond)?;
    let intervals = match binning {
        Binning::Intervals(v) => {
            if v.is_empty() {
                return Err(Error::InvalidParameter("no conditioning intervals".into()));
            }
            v.clone()
        }
        Binning::EqualCount(b) => equal_count_intervals(&x, *b)?,
    };
    let mut counts = vec![vec![0u64; cells]; intervals.len()];
    let mut unbinned = 0;
    for (&xt, &zt) in x.iter().zip(&z) {
        match intervals.iter().position(|iv| iv.contains(xt)) {
            Some(b) => {
                let c = ((zt * cells as f64) as usize).min(cells - 1);
                counts[b][c] += 1;
            }
            None => unbinned += 1,
        }
    }
    let bins = intervals
        .into_iter()
        .zip(counts)
        .map(|(interval, cells)| {
            let count = cells.iter().sum();
            let test = if count > 0 { chi_square_uniform(&cells).ok() } else { None };
            PitBin {
                interval,
                count,
                cells,
                chi_square: test.map(|t| t.statistic),
                p_value: test.map(|t| t.p_value),
            }
        })
        .collect();
    Ok(ConditionalPitHistogram { tested: i, conditioning: cond, bins, unbinned })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Forecaster;
    use crate::dist::{Distribution, Family};
    use crate::scenarios::{simulate, ScenarioName, ScenarioSpec};

    fn gr(n: usize, seed: u64) -> PredictionDataset {
        simulate(&ScenarioSpec { name: ScenarioName::Gr2013, n, seed }).unwrap()
    }

    #[test]
    fn single_row_curve_is_a_step() {
        let f = Forecaster::new("A", Family::Normal, vec![Distribution::Normal { mean: 0.0, sd: 1.0 }]).unwrap();
        let ds = PredictionDataset::new(vec![f], vec![0.3], vec![0.5]).unwrap();
        let grid = [-1.0, 0.0, 0.29, 0.31, 2.0];
        let c = marginal_cross_calibration_curve(&ds, 0, 0, &grid).unwrap();
        let d = Distribution::Normal { mean: 0.0, sd: 1.0 };
        for (y, v) in grid.iter().zip(&c.values) {
            let step = if *y >= 0.3 { 1.0 } else { 0.0 };
            assert!((v - (d.cdf(*y) - step)).abs() < 1e-15);
        }
    }

    #[test]
    fn refined_grid_agrees_at_shared_points() {
        let ds = gr(300, 1);
        let fine: Vec<f64> = (0..31).map(|k| -3.0 + 0.2 * k as f64).collect();
        let coarse: Vec<f64> = fine.iter().step_by(3).copied().collect();
        let a = marginal_cross_calibration_curve(&ds, 1, 0, &coarse).unwrap();
        let b = marginal_cross_calibration_curve(&ds, 1, 0, &fine).unwrap();
        for (k, v) in a.values.iter().enumerate() {
            assert_eq!(*v, b.values[3 * k]);
        }
        assert!(a.values.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn default_grid_shape() {
        let ds = gr(100, 2);
        let g = default_marginal_grid(&ds);
        assert_eq!(g.len(), 201);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        let c = marginal_cross_calibration_curve(&ds, 0, 0, &g).unwrap();
        assert!(c.values[0].abs() < 0.05 && c.values[200].abs() < 0.05);
        assert!(marginal_cross_calibration_curve(&ds, 0, 0, &[]).is_err());
        assert!(marginal_cross_calibration_curve(&ds, 0, 0, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn histogram_counts_add_up() {
        let ds = gr(1000, 3);
        let h = conditional_pit_histogram(
            &ds,
            0,
            Conditioning::Parameter { forecaster: 0, param: 0 },
            &Binning::Intervals(vec![Interval::left_open(-0.67, 0.0), Interval::left_open(0.0, 0.67)]),
            10,
        )
        .unwrap();
        let binned: u64 = h.bins.iter().map(|b| b.count).sum();
        assert_eq!(binned + h.unbinned, 1000);
        assert!(h.unbinned > 0);
        for b in &h.bins {
            assert_eq!(b.cells.iter().sum::<u64>(), b.count);
        }
        assert_eq!(h.to_csv().lines().count(), 1 + 2 * 10);
    }

    #[test]
    fn equal_count_bins_cover_everything() {
        let ds = gr(997, 4);
        let h = conditional_pit_histogram(
            &ds,
            1,
            Conditioning::Parameter { forecaster: 0, param: 0 },
            &Binning::EqualCount(4),
            10,
        )
        .unwrap();
        assert_eq!(h.unbinned, 0);
        assert_eq!(h.bins.len(), 4);
        for b in &h.bins {
            assert!((b.count as i64 - 249).abs() <= 2, "{}", b.count);
        }
    }

    #[test]
    fn predictive_sd_conditioning() {
        let ds = simulate(&ScenarioSpec { name: ScenarioName::Tdf, n: 200, seed: 5 }).unwrap();
        let x = conditioning_values(&ds, Conditioning::PredictiveSd { forecaster: 0 }).unwrap();
        for (t, v) in x.iter().enumerate() {
            assert_eq!(*v, ds.forecasters()[0].forecasts()[t].params()[1]);
        }
        assert!(conditioning_values(&ds, Conditioning::Parameter { forecaster: 1, param: 1 }).is_err());
    }

    #[test]
    fn argument_checks() {
        let ds = gr(20, 6);
        let c = Conditioning::Parameter { forecaster: 0, param: 0 };
        assert!(conditional_pit_histogram(&ds, 0, c, &Binning::EqualCount(2), 1).is_err());
        assert!(conditional_pit_histogram(&ds, 0, c, &Binning::Intervals(vec![]), 10).is_err());
        assert!(conditional_pit_histogram(&ds, 9, c, &Binning::EqualCount(2), 10).is_err());
    }

    #[test]
    fn interval_membership() {
        let a = Interval::left_open(0.0, 1.0);
        assert!(!a.contains(0.0) && a.contains(1.0) && a.contains(0.5));
        assert!(Interval::closed(0.0, 1.0).contains(0.0));
        assert!(Interval::left_open(1.1, f64::INFINITY).contains(1e300));
    }
}
