//! Score regression approach.
//!
//! For an ideal forecaster with predictive scale `σ`, the expected CRPS is
//! `d σ` and the expected DSS is `½ + log σ`, whatever other forecasters say.
//! Realized scores are regressed on the scales of the tested forecaster and
//! its competitors, and the coefficients are compared with these values by a
//! Wald statistic.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::PredictionDataset;
use crate::dist::{Distribution, Family};
use crate::error::{Error, Result};
use crate::quadrature::integrate_pieces;
use crate::regression::{ols, wls};
use crate::rng;
use crate::special::{chi2_sf, norm_cdf, norm_pdf};

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Score {
    Crps,
    Dss,
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Score::Crps => "crps",
            Score::Dss => "dss",
        })
    }
}

impl FromStr for Score {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "crps" => Ok(Score::Crps),
            "dss" => Ok(Score::Dss),
            _ => Err(Error::InvalidParameter(format!("unknown score `{s}`"))),
        }
    }
}

/// Closed-form CRPS of `N(mean, sd²)` at `y`.
pub fn crps_normal(mean: f64, sd: f64, y: f64) -> Result<f64> {
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(Error::InvalidParameter(format!("sd must be positive, got {sd}")));
    }
    let u = (y - mean) / sd;
    Ok(sd * (u * (2.0 * norm_cdf(u) - 1.0) + 2.0 * norm_pdf(u) - FRAC_1_SQRT_PI))
}

/// CRPS by quadrature of `∫ (F(x) - 1{y ≤ x})² dx`.
pub fn crps_generic(d: &Distribution, y: f64) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::NonFinite);
    }
    if d.mean().is_none() {
        return Err(Error::NonIntegrable(format!("{} has no finite mean", d.family())));
    }
    let f = |x: f64| {
        let c = d.cdf(x);
        if x < y {
            c * c
        } else {
            (1.0 - c) * (1.0 - c)
        }
    };
    let mut breaks = vec![y];
    if let (Some(m), Some(s)) = (d.mean(), d.std_dev()) {
        breaks.extend([m - 5.0 * s, m - s, m, m + s, m + 5.0 * s]);
    }
    if let Distribution::Bernoulli { .. } = d {
        breaks.extend([0.0, 1.0]);
    }
    integrate_pieces(f, f64::NEG_INFINITY, f64::INFINITY, &breaks, 1e-9)
}

/// Dawid-Sebastiani score `½ {log σ² + (y - μ)² / σ²}`.
pub fn dss(mean: f64, variance: f64, y: f64) -> Result<f64> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::InvalidParameter(format!("variance must be positive, got {variance}")));
    }
    Ok(0.5 * (variance.ln() + (y - mean).powi(2) / variance))
}

/// `E CRPS = d σ` and `var CRPS = D σ²` for a location-scale family with base law `X₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrpsConstants {
    pub d: f64,
    pub big_d: f64,
    /// Monte Carlo standard errors; zero for closed forms.
    pub d_se: f64,
    pub big_d_se: f64,
}

impl CrpsConstants {
    pub fn normal() -> Self {
        CrpsConstants {
            d: FRAC_1_SQRT_PI,
            big_d: 1.0 / 3.0 - (4.0 - 12f64.sqrt()) / std::f64::consts::PI,
            d_se: 0.0,
            big_d_se: 0.0,
        }
    }
}

/// Default number of Monte Carlo triples.
pub const CONSTANT_DRAWS: usize = 1_000_000;

/// Constants for the family of `base`; closed form for the normal.
pub fn crps_constants(base: &Distribution, seed: u64) -> Result<CrpsConstants> {
    match base.family() {
        Family::Normal => Ok(CrpsConstants::normal()),
        Family::StudentT => crps_constants_mc(base, CONSTANT_DRAWS, seed),
        other => Err(Error::InvalidParameter(format!(
            "{other} is not a location-scale family"
        ))),
    }
}

/// Monte Carlo constants from iid triples `(a, b, c)` of the base law.
///
/// `d` is estimated by `|a - b| / (2 sd)`; `D` by
/// `E|a-c||b-c| - E|a-c| E|b-c|`, which is `var E(|X - Y| | Y)`, over `var X₀`.
pub fn crps_constants_mc(base: &Distribution, draws: usize, seed: u64) -> Result<CrpsConstants> {
    let var = base
        .variance()
        .ok_or_else(|| Error::InvalidParameter(format!("{} has no finite variance", base.family())))?;
    const BATCHES: usize = 100;
    if draws < BATCHES * 2 {
        return Err(Error::TooShort { needed: BATCHES * 2, got: draws });
    }
    let per = draws / BATCHES;
    let batch: Vec<(f64, f64, f64, f64)> = (0..BATCHES)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(seed, b as u64);
            let (mut s_ab, mut s_h, mut s_ac, mut s_bc) = (0.0, 0.0, 0.0, 0.0);
            for _ in 0..per {
                let a = base.sample(&mut r);
                let bb = base.sample(&mut r);
                let c = base.sample(&mut r);
                let (ac, bc) = ((a - c).abs(), (bb - c).abs());
                s_ab += (a - bb).abs();
                s_h += ac * bc;
                s_ac += ac;
                s_bc += bc;
            }
            let m = per as f64;
            (s_ab / m, s_h / m, s_ac / m, s_bc / m)
        })
        .collect();
    let sd = var.sqrt();
    let ds: Vec<f64> = batch.iter().map(|b| b.0 / (2.0 * sd)).collect();
    let dd: Vec<f64> = batch.iter().map(|b| (b.1 - b.2 * b.3) / var).collect();
    let (d, d_se) = mean_se(&ds);
    let (big_d, big_d_se) = mean_se(&dd);
    Ok(CrpsConstants { d, big_d, d_se, big_d_se })
}

fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SraReport {
    pub test: String,
    pub score: Score,
    pub tested: usize,
    pub others: Vec<usize>,
    pub n: usize,
    pub regressors: Vec<String>,
    pub coef: Vec<f64>,
    pub null: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

impl SraReport {
    pub fn reject(&self, alpha: f64) -> bool {
        self.p_value <= alpha
    }
}

/// Wald test of the ideal-forecaster null for forecaster `i` (0-based).
///
/// Regressors are the predictive scale of `i` followed by those of `others`
/// (with `i` and repeats removed). The DSS branch fits `a + Σ b log σ` by
/// OLS; the CRPS branch fits `c + Σ d σ` by WLS with weights `1/σ_i` and
/// needs normal forecasts from `i`.
pub fn sra_test(ds: &PredictionDataset, i: usize, others: &[usize], score: Score) -> Result<SraReport> {
    let tested = ds.forecaster(i)?;
    ds.check_indices(others)?;
    let mut members = vec![i];
    for &j in others {
        if !members.contains(&j) {
            members.push(j);
        }
    }
    let n = ds.n();
    let mut scales = Vec::with_capacity(members.len());
    for &j in &members {
        let f = ds.forecaster(j)?;
        let sd: Vec<f64> = f
            .forecasts()
            .iter()
            .map(|d| d.std_dev().filter(|s| *s > 0.0 && s.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| {
                Error::InvalidParameter(format!("forecaster {} lacks a finite predictive sd", f.label()))
            })?;
        let (lo, hi) = sd
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        if hi - lo <= 1e-12 * hi {
            return Err(Error::DegenerateVariance(format!(
                "forecaster {} predicts a constant scale",
                f.label()
            )));
        }
        scales.push(sd);
    }
    let p = 1 + members.len();
    let y = ds.y();
    let (scores, transform, null_slope, null_intercept): (Vec<f64>, fn(f64) -> f64, f64, f64) = match score {
        Score::Dss => {
            let s = tested
                .forecasts()
                .iter()
                .zip(y)
                .map(|(d, &yt)| {
                    let m = d.mean().ok_or_else(|| {
                        Error::InvalidParameter(format!("forecaster {} lacks a finite mean", tested.label()))
                    })?;
                    dss(m, d.variance().unwrap_or(f64::NAN), yt)
                })
                .collect::<Result<_>>()?;
            (s, f64::ln, 1.0, 0.5)
        }
        Score::Crps => {
            let s = tested
                .forecasts()
                .iter()
                .zip(y)
                .map(|(d, &yt)| match *d {
                    Distribution::Normal { mean, sd } => crps_normal(mean, sd, yt),
                    _ => Err(Error::InvalidParameter(format!(
                        "CRPS regression needs normal forecasts from {}",
                        tested.label()
                    ))),
                })
                .collect::<Result<_>>()?;
            (s, |s| s, FRAC_1_SQRT_PI, 0.0)
        }
    };
    let x = DMatrix::from_fn(n, p, |t, c| if c == 0 { 1.0 } else { transform(scales[c - 1][t]) });
    let fit = match score {
        Score::Dss => ols(&x, &scores)?,
        Score::Crps => {
            let w: Vec<f64> = scales[0].iter().map(|s| 1.0 / s).collect();
            wls(&x, &scores, Some(&w))?
        }
    };
    let sigma2 = fit.rss / (n - p) as f64;
    let cov = &fit.xtx_inv * sigma2;
    let mut null = vec![0.0; p];
    null[0] = null_intercept;
    null[1] = null_slope;
    let delta = DVector::from_iterator(p, fit.coef.iter().zip(&null).map(|(b, h)| b - h));
    let chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularCovariance("coefficient covariance is not positive definite".into()))?;
    let statistic = delta.dot(&chol.solve(&delta)).max(0.0);
    let df = p;
    let p_value = chi2_sf(statistic, df as f64)?;
    let prefix = match score {
        Score::Dss => "log_sd_",
        Score::Crps => "sd_",
    };
    let mut regressors = vec!["intercept".to_string()];
    regressors.extend(members.iter().map(|&j| format!("{prefix}{}", ds.forecasters()[j].label())));
    Ok(SraReport {
        test: "sra".into(),
        score,
        tested: i,
        others: members[1..].to_vec(),
        n,
        regressors,
        coef: fit.coef.iter().copied().collect(),
        null,
        covariance: (0..p).map(|r| (0..p).map(|c| cov[(r, c)]).collect()).collect(),
        statistic,
        df,
        p_value,
    })
}
