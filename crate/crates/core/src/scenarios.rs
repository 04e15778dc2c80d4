//! Generative models for the simulation studies and the AR(1) rolling baseline.
//!
//! | name            | forecasters                                                     |
//! |-----------------|-----------------------------------------------------------------|
//! | `gr2013`        | perfect, climatological, unfocused, sign-reversed (mixture family) |
//! | `tdf`           | `N(0, σ)` with `σ² = ν/χ²_ν`, and Student-t with `ν ~ U(5, 20)`    |
//! | `scale-perturb` | `N(0, 1+σ)` and `N(0, 1+σ+ε)` with `σ ~ U(0,1)`, `ε ~ N(0, 1/4²)`  |
//! | `binary-beta`   | Bernoulli with `(B+C)/2` and with `C`, `B ~ Beta(3,5)`, `C ~ Beta(2,1.5)` |
//!
//! All rows are independent.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Beta, ChiSquared, Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Forecaster, PredictionDataset};
use crate::dist::{Distribution, Family};
use crate::error::{Error, Result};
use crate::rng;
use crate::special::norm_cdf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioName {
    BinaryBeta,
    Tdf,
    Gr2013,
    ScalePerturb,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 4] = [
        ScenarioName::BinaryBeta,
        ScenarioName::Tdf,
        ScenarioName::Gr2013,
        ScenarioName::ScalePerturb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioName::BinaryBeta => "binary-beta",
            ScenarioName::Tdf => "tdf",
            ScenarioName::Gr2013 => "gr2013",
            ScenarioName::ScalePerturb => "scale-perturb",
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        ScenarioName::ALL
            .into_iter()
            .find(|n| n.name() == key)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown scenario `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: ScenarioName,
    pub n: usize,
    pub seed: u64,
}

/// A simulated dataset plus the number of rejected draws.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub dataset: PredictionDataset,
    pub redraws: usize,
}

/// Simulates a dataset; see [`simulate_logged`] for the redraw count.
pub fn simulate(spec: &ScenarioSpec) -> Result<PredictionDataset> {
    simulate_logged(spec).map(|s| s.dataset)
}

pub fn simulate_logged(spec: &ScenarioSpec) -> Result<Simulation> {
    if spec.n == 0 {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    let mut r = rng::stream(spec.seed, 0);
    let n = spec.n;
    let mut y = Vec::with_capacity(n);
    let mut redraws = 0;
    let forecasters = match spec.name {
        ScenarioName::Gr2013 => {
            let mut f: [Vec<Distribution>; 4] = Default::default();
            let clim = Distribution::NormalMixture {
                mean: 0.0,
                sd: std::f64::consts::SQRT_2,
                shift: 0.0,
            };
            for _ in 0..n {
                let mu: f64 = StandardNormal.sample(&mut r);
                let e: f64 = StandardNormal.sample(&mut r);
                let tau = if r.random::<bool>() { 1.0 } else { -1.0 };
                y.push(mu + e);
                f[0].push(Distribution::NormalMixture { mean: mu, sd: 1.0, shift: 0.0 });
                f[1].push(clim);
                f[2].push(Distribution::NormalMixture { mean: mu, sd: 1.0, shift: tau });
                f[3].push(Distribution::NormalMixture { mean: -mu, sd: 1.0, shift: 0.0 });
            }
            let [f1, f2, f3, f4] = f;
            vec![
                Forecaster::new("F1", Family::NormalMixture, f1)?,
                Forecaster::new("F2", Family::NormalMixture, f2)?,
                Forecaster::new("F3", Family::NormalMixture, f3)?,
                Forecaster::new("F4", Family::NormalMixture, f4)?,
            ]
        }
        ScenarioName::Tdf => {
            let mut f1 = Vec::with_capacity(n);
            let mut f2 = Vec::with_capacity(n);
            for _ in 0..n {
                let nu = 5.0 + 15.0 * r.random::<f64>();
                let chi: f64 = ChiSquared::new(nu).expect("positive df").sample(&mut r);
                let sigma = (nu / chi).sqrt();
                let e: f64 = StandardNormal.sample(&mut r);
                y.push(sigma * e);
                f1.push(Distribution::Normal { mean: 0.0, sd: sigma });
                f2.push(Distribution::StudentT { df: nu });
            }
            vec![
                Forecaster::new("F1", Family::Normal, f1)?,
                Forecaster::new("F2", Family::StudentT, f2)?,
            ]
        }
        ScenarioName::ScalePerturb => {
            let mut f1 = Vec::with_capacity(n);
            let mut f2 = Vec::with_capacity(n);
            for _ in 0..n {
                let (s, eps) = loop {
                    let s: f64 = r.random::<f64>();
                    let z: f64 = StandardNormal.sample(&mut r);
                    let eps = 0.25 * z;
                    if 1.0 + s + eps > 0.01 {
                        break (s, eps);
                    }
                    redraws += 1;
                };
                let e: f64 = StandardNormal.sample(&mut r);
                y.push((1.0 + s) * e);
                f1.push(Distribution::Normal { mean: 0.0, sd: 1.0 + s });
                f2.push(Distribution::Normal { mean: 0.0, sd: 1.0 + s + eps });
            }
            vec![
                Forecaster::new("F1", Family::Normal, f1)?,
                Forecaster::new("F2", Family::Normal, f2)?,
            ]
        }
        ScenarioName::BinaryBeta => {
            let laws = BinaryBetaLaws::new();
            let mut f1 = Vec::with_capacity(n);
            let mut f2 = Vec::with_capacity(n);
            for _ in 0..n {
                let (p1, p2, omega) = laws.draw(&mut r);
                y.push(if omega { 1.0 } else { 0.0 });
                f1.push(Distribution::Bernoulli { p: p1 });
                f2.push(Distribution::Bernoulli { p: p2 });
            }
            vec![
                Forecaster::new("F1", Family::Bernoulli, f1)?,
                Forecaster::new("F2", Family::Bernoulli, f2)?,
            ]
        }
    };
    let v = (0..n).map(|_| r.random::<f64>()).collect();
    Ok(Simulation {
        dataset: PredictionDataset::new(forecasters, y, v)?,
        redraws,
    })
}

/// Row generator of the binary-beta scenario.
pub(crate) struct BinaryBetaLaws {
    b: Beta<f64>,
    c: Beta<f64>,
}

impl BinaryBetaLaws {
    pub(crate) fn new() -> Self {
        BinaryBetaLaws {
            b: Beta::new(3.0, 5.0).expect("valid shapes"),
            c: Beta::new(2.0, 1.5).expect("valid shapes"),
        }
    }

    /// Returns `((B+C)/2, C, ω)`.
    pub(crate) fn draw<R: Rng + ?Sized>(&self, r: &mut R) -> (f64, f64, bool) {
        let b = self.b.sample(r);
        let c = self.c.sample(r);
        let p = 0.5 * (b + c);
        (p, c, r.random::<f64>() < p)
    }
}

/// Rolling-window AR(1) forecast issued at one origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArForecast {
    /// Index of the last observation used; the forecast targets `origin + 1`.
    pub origin: usize,
    pub intercept: f64,
    pub slope: f64,
    pub mean: f64,
    pub sd: f64,
}

/// One-step Gaussian forecasts from AR(1) fits on rolling windows of `window` pairs.
///
/// At origin `t` the pairs `(y_{s-1}, y_s)`, `s = t-window+1..=t`, are fitted
/// by OLS with intercept; the predictive sd uses the `window - 2` divisor.
/// Origins without a full window are skipped.
pub fn ar1_rolling_forecasts(series: &[f64], window: usize) -> Result<Vec<ArForecast>> {
    if window < 3 {
        return Err(Error::InvalidParameter(format!(
            "window must be at least 3, got {window}"
        )));
    }
    if series.len() <= window + 1 {
        return Err(Error::TooShort {
            needed: window + 2,
            got: series.len(),
        });
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let w = window as f64;
    let mut out = Vec::with_capacity(series.len() - window);
    for t in window..series.len() {
        let pairs = (t + 1 - window..=t).map(|s| (series[s - 1], series[s]));
        let (mut sx, mut sy) = (0.0, 0.0);
        for (x, y) in pairs.clone() {
            sx += x;
            sy += y;
        }
        let (mx, my) = (sx / w, sy / w);
        let (mut sxx, mut sxy) = (0.0, 0.0);
        for (x, y) in pairs.clone() {
            sxx += (x - mx) * (x - mx);
            sxy += (x - mx) * (y - my);
        }
        let scale = series[t + 1 - window - 1..=t]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1.0);
        if sxx <= 1e-24 * scale * scale * w {
            return Err(Error::DegenerateVariance(format!(
                "lagged values are constant in the window ending at origin {t}"
            )));
        }
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let rss: f64 = pairs
            .map(|(x, y)| {
                let e = y - intercept - slope * x;
                e * e
            })
            .sum();
        if rss <= 1e-24 * scale * scale * w {
            return Err(Error::DegenerateVariance(format!(
                "zero residual variance at origin {t}"
            )));
        }
        let sd = (rss / (w - 2.0)).sqrt();
        out.push(ArForecast {
            origin: t,
            intercept,
            slope,
            mean: intercept + slope * series[t],
            sd,
        });
    }
    Ok(out)
}

/// `Ψ₊(x) = ½{Φ(x) + Φ(x − 1)}`.
pub fn psi_plus(x: f64) -> f64 {
    0.5 * (norm_cdf(x) + norm_cdf(x - 1.0))
}

/// `Ψ₋(x) = ½{Φ(x) + Φ(x + 1)}`.
pub fn psi_minus(x: f64) -> f64 {
    0.5 * (norm_cdf(x) + norm_cdf(x + 1.0))
}

/// Inverse of an increasing CDF-like map by bisection.
pub fn invert_increasing(f: impl Fn(f64) -> f64, y: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * mid.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}
