//! Marginal cross-calibration chi-square test on a fixed grid.
//!
//! `S_n(y) = F_{j,n}(y) - 1{z_{i,n} ≤ F_{j,n}(y)}` has mean zero at every `y`
//! when forecaster `i` is marginally cross-calibrated with respect to `j`.
//! The test is a Hotelling-type quadratic form of the grid means. Its
//! p-value is known to depend strongly on the grid, so it is reported as
//! fragile.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::PredictionDataset;
use crate::error::{Error, Result};
use crate::special::{chi2_sf, norm_quantile};

/// Largest accepted condition number of the sample covariance.
pub const MAX_CONDITION: f64 = 1e12;

pub const GRID_M9: [f64; 9] = [-1.81, -1.19, -0.74, -0.36, 0.0, 0.36, 0.74, 1.19, 1.81];
pub const GRID_M4: [f64; 4] = [-1.19, -0.35, 0.35, 1.19];
pub const GRID_M3: [f64; 3] = [-0.95, 0.0, 0.95];

/// Named grids, plus `normal-m` for the `m` quantiles of `N(0, 2)` at `j/(m+1)`.
pub fn preset(name: &str) -> Result<Vec<f64>> {
    match name {
        "m9" => Ok(GRID_M9.to_vec()),
        "m4" => Ok(GRID_M4.to_vec()),
        "m3" => Ok(GRID_M3.to_vec()),
        _ => name
            .strip_prefix("normal-")
            .and_then(|m| m.parse::<usize>().ok())
            .filter(|&m| m >= 1)
            .map(normal_quantile_grid)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown grid preset `{name}`"))),
    }
}

/// `√2 Φ⁻¹(j/(m+1))` for `j = 1..=m`.
pub fn normal_quantile_grid(m: usize) -> Vec<f64> {
    (1..=m)
        .map(|j| std::f64::consts::SQRT_2 * norm_quantile(j as f64 / (m + 1) as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MctReport {
    pub test: String,
    pub fragile: bool,
    pub tested: usize,
    pub reference: usize,
    pub n: usize,
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

impl MctReport {
    pub fn reject(&self, alpha: f64) -> bool {
        self.p_value <= alpha
    }
}

/// Tests forecaster `i` against the marginal of forecaster `j` (0-based).
pub fn mct_test(ds: &PredictionDataset, i: usize, j: usize, grid: &[f64]) -> Result<MctReport> {
    let m = grid.len();
    if m == 0 {
        return Err(Error::InvalidParameter("empty grid".into()));
    }
    if grid.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite);
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("grid must be strictly increasing".into()));
    }
    let n = ds.n();
    if n <= m {
        return Err(Error::TooShort { needed: m + 1, got: n });
    }
    let (lo, hi) = ds
        .y()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if let Some(g) = grid.iter().find(|&&g| g < lo || g > hi) {
        return Err(Error::InvalidParameter(format!(
            "grid point {g} lies outside the observed range [{lo}, {hi}]"
        )));
    }
    let z = ds.pit_series(i)?.values;
    let fj = ds.forecaster(j)?.forecasts();
    let s = DMatrix::from_fn(n, m, |t, k| {
        let c = fj[t].cdf(grid[k]);
        c - if z[t] <= c { 1.0 } else { 0.0 }
    });
    let nf = n as f64;
    let mean = DVector::from_fn(m, |k, _| s.column(k).sum() / nf);
    let mut centered = s;
    for k in 0..m {
        let mk = mean[k];
        centered.column_mut(k).iter_mut().for_each(|x| *x -= mk);
    }
    let cov = (centered.transpose() * &centered) / nf;
    let eig = cov.clone().symmetric_eigen();
    let (mut kmin, mut kmax) = (0, 0);
    for k in 1..m {
        if eig.eigenvalues[k] < eig.eigenvalues[kmin] {
            kmin = k;
        }
        if eig.eigenvalues[k] > eig.eigenvalues[kmax] {
            kmax = k;
        }
    }
    let (emin, emax) = (eig.eigenvalues[kmin], eig.eigenvalues[kmax]);
    if !(emax > 0.0) || !(emin > emax / MAX_CONDITION) {
        let v = eig.eigenvectors.column(kmin);
        let worst = (0..m)
            .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()))
            .unwrap_or(0);
        return Err(Error::SingularCovariance(format!(
            "covariance is near-singular (eigenvalues {emin:e} .. {emax:e}); grid point {} (y = {}) drives the smallest eigenvalue",
            worst + 1,
            grid[worst]
        )));
    }
    let proj = eig.eigenvectors.transpose() * &mean;
    let statistic = nf
        * proj
            .iter()
            .zip(eig.eigenvalues.iter())
            .map(|(p, l)| p * p / l)
            .sum::<f64>();
    let p_value = chi2_sf(statistic, m as f64)?;
    Ok(MctReport {
        test: "mct".into(),
        fragile: true,
        tested: i,
        reference: j,
        n,
        grid: grid.to_vec(),
        mean: mean.iter().copied().collect(),
        covariance: (0..m).map(|r| (0..m).map(|c| cov[(r, c)]).collect()).collect(),
        statistic,
        df: m,
        p_value,
    })
}

/// One point of a grid-size sweep; `p_value` is absent when the test failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub m: usize,
    pub p_value: Option<f64>,
    pub error: Option<String>,
}

/// p-values over the normal-quantile grids of sizes `ms`.
pub fn mct_grid_sweep(
    ds: &PredictionDataset,
    i: usize,
    j: usize,
    ms: impl IntoIterator<Item = usize>,
) -> Vec<SweepPoint> {
    ms.into_iter()
        .map(|m| match mct_test(ds, i, j, &normal_quantile_grid(m)) {
            Ok(r) => SweepPoint { m, p_value: Some(r.p_value), error: None },
            Err(e) => SweepPoint { m, p_value: None, error: Some(e.to_string()) },
        })
        .collect()
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
    fn presets_match_variance_two_quantiles() {
        for (m, preset_grid) in [(9, GRID_M9.to_vec()), (3, GRID_M3.to_vec())] {
            for (a, b) in normal_quantile_grid(m).iter().zip(&preset_grid) {
                assert!((a - b).abs() < 0.006, "{a} vs {b}");
            }
        }
        let g4 = normal_quantile_grid(4);
        assert!((g4[0] - GRID_M4[0]).abs() < 0.006);
        assert!((g4[1] - GRID_M4[1]).abs() < 0.01);
        assert_eq!(preset("m4").unwrap(), GRID_M4.to_vec());
        assert_eq!(preset("normal-5").unwrap().len(), 5);
        assert!(preset("m7").is_err());
    }

    #[test]
    fn hand_checked_statistic() {
        let ds = gr(40, 1);
        let grid = [-0.5, 0.5];
        let r = mct_test(&ds, 0, 1, &grid).unwrap();
        let z = ds.pit_series(0).unwrap().values;
        let rows: Vec<[f64; 2]> = (0..40)
            .map(|t| {
                let mut v = [0.0; 2];
                for k in 0..2 {
                    let c = ds.forecasters()[1].forecasts()[t].cdf(grid[k]);
                    v[k] = c - if z[t] <= c { 1.0 } else { 0.0 };
                }
                v
            })
            .collect();
        let m0 = rows.iter().map(|v| v[0]).sum::<f64>() / 40.0;
        let m1 = rows.iter().map(|v| v[1]).sum::<f64>() / 40.0;
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for v in &rows {
            a += (v[0] - m0).powi(2);
            b += (v[0] - m0) * (v[1] - m1);
            c += (v[1] - m1).powi(2);
        }
        let (a, b, c) = (a / 40.0, b / 40.0, c / 40.0);
        let det = a * c - b * b;
        let t = 40.0 * (c * m0 * m0 - 2.0 * b * m0 * m1 + a * m1 * m1) / det;
        assert!((r.statistic - t).abs() < 1e-9 * t.max(1.0));
        assert_eq!(r.df, 2);
        assert!(r.fragile);
    }

    #[test]
    fn permutation_invariance() {
        let ds = gr(100, 2);
        let rows: Vec<usize> = (0..100).rev().collect();
        let a = mct_test(&ds, 2, 3, &GRID_M4).unwrap();
        let b = mct_test(&ds.select_rows(&rows).unwrap(), 2, 3, &GRID_M4).unwrap();
        assert!((a.statistic - b.statistic).abs() < 1e-9 * a.statistic.max(1.0));
    }

    #[test]
    fn identical_rows_give_singular_covariance() {
        let d = Distribution::Normal { mean: 0.0, sd: 1.0 };
        let f = Forecaster::new("A", Family::Normal, vec![d; 10]).unwrap();
        let y = vec![-2.0, 2.0, -2.0, 2.0, -2.0, 2.0, -2.0, 2.0, -2.0, 2.0];
        let ds = PredictionDataset::new(vec![f], y, vec![0.5; 10]).unwrap();
        let err = mct_test(&ds, 0, 0, &[-1.0, 1.0]).unwrap_err();
        assert!(err.is_degenerate());
        assert!(err.to_string().contains("grid point"));
    }

    #[test]
    fn grid_checks() {
        let ds = gr(50, 3);
        assert!(mct_test(&ds, 0, 0, &[]).is_err());
        assert!(mct_test(&ds, 0, 0, &[0.5, 0.1]).is_err());
        assert!(matches!(mct_test(&ds, 0, 0, &[0.0, 100.0]), Err(Error::InvalidParameter(_))));
        let tiny = gr(3, 3);
        assert!(matches!(mct_test(&tiny, 0, 0, &GRID_M3), Err(Error::TooShort { .. })));
    }

    #[test]
    fn sign_reversed_forecaster_is_detected() {
        let ds = gr(500, 4);
        assert!(mct_test(&ds, 3, 0, &GRID_M4).unwrap().p_value < 1e-6);
    }

    #[test]
    fn sweep_reports_each_size() {
        let ds = gr(500, 5);
        let s = mct_grid_sweep(&ds, 2, 3, 2..=6);
        assert_eq!(s.iter().map(|p| p.m).collect::<Vec<_>>(), vec![2, 3, 4, 5, 6]);
        assert!(s.iter().all(|p| p.p_value.is_some() != p.error.is_some()));
    }
}
