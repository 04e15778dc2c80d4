//! Predictive distribution families.
//!
//! Every forecaster in a [`PredictionDataset`](crate::PredictionDataset) issues
//! one member of a [`Family`] per time point. [`Distribution`] is that member:
//! a small `Copy` value with CDF, left limit, density, quantile and sampler.

use std::f64::consts::{FRAC_2_PI, PI};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Beta as BetaSampler, ChiSquared, Distribution as _, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::special::{
    invert_cdf, norm_cdf, norm_pdf, norm_quantile, norm_sf, student_t_cdf, student_t_pdf,
};

/// Parametric family tag, with the parameter names used in files and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Normal,
    StudentT,
    TwoPieceNormal,
    NormalMixture,
    Bernoulli,
    Beta,
    ScaledInvChiSq,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Normal,
        Family::StudentT,
        Family::TwoPieceNormal,
        Family::NormalMixture,
        Family::Bernoulli,
        Family::Beta,
        Family::ScaledInvChiSq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Normal => "normal",
            Family::StudentT => "student_t",
            Family::TwoPieceNormal => "two_piece_normal",
            Family::NormalMixture => "normal_mixture",
            Family::Bernoulli => "bernoulli",
            Family::Beta => "beta",
            Family::ScaledInvChiSq => "scaled_inv_chi_sq",
        }
    }

    /// Parameter names in storage order.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Family::Normal => &["mean", "sd"],
            Family::StudentT => &["df"],
            Family::TwoPieceNormal => &["mu", "sig1", "sig2"],
            Family::NormalMixture => &["mu", "sigma", "tau"],
            Family::Bernoulli => &["p"],
            Family::Beta => &["a", "b"],
            Family::ScaledInvChiSq => &["df"],
        }
    }

    pub fn arity(self) -> usize {
        self.param_names().len()
    }

    /// Builds a validated distribution from parameters in storage order.
    pub fn distribution(self, params: &[f64]) -> Result<Distribution> {
        if params.len() != self.arity() {
            return Err(Error::InvalidParameter(format!(
                "{} takes {} parameters, got {}",
                self.name(),
                self.arity(),
                params.len()
            )));
        }
        let p = params;
        match self {
            Family::Normal => Distribution::normal(p[0], p[1]),
            Family::StudentT => Distribution::student_t(p[0]),
            Family::TwoPieceNormal => Distribution::two_piece_normal(p[0], p[1], p[2]),
            Family::NormalMixture => Distribution::normal_mixture(p[0], p[1], p[2]),
            Family::Bernoulli => Distribution::bernoulli(p[0]),
            Family::Beta => Distribution::beta(p[0], p[1]),
            Family::ScaledInvChiSq => Distribution::scaled_inv_chi_sq(p[0]),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Family::ALL
            .into_iter()
            .find(|f| f.name() == key)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown family `{s}`")))
    }
}

/// One predictive distribution.
///
/// `StudentT` is the standard (location 0, scale 1) t law. `NormalMixture` is
/// the equal-weight mixture of N(mean, sd²) and N(mean + shift, sd²).
/// `ScaledInvChiSq { df }` is the law of `df / X` with `X ~ χ²(df)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Distribution {
    Normal { mean: f64, sd: f64 },
    StudentT { df: f64 },
    TwoPieceNormal { mode: f64, sd_left: f64, sd_right: f64 },
    NormalMixture { mean: f64, sd: f64, shift: f64 },
    Bernoulli { p: f64 },
    Beta { a: f64, b: f64 },
    ScaledInvChiSq { df: f64 },
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be strictly positive, got {v}"
        )))
    }
}

impl Distribution {
    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        check_finite("mean", mean)?;
        check_positive("sd", sd)?;
        Ok(Distribution::Normal { mean, sd })
    }

    pub fn student_t(df: f64) -> Result<Self> {
        check_positive("df", df)?;
        Ok(Distribution::StudentT { df })
    }

    pub fn two_piece_normal(mode: f64, sd_left: f64, sd_right: f64) -> Result<Self> {
        check_finite("mu", mode)?;
        check_positive("sig1", sd_left)?;
        check_positive("sig2", sd_right)?;
        Ok(Distribution::TwoPieceNormal {
            mode,
            sd_left,
            sd_right,
        })
    }

    pub fn normal_mixture(mean: f64, sd: f64, shift: f64) -> Result<Self> {
        check_finite("mu", mean)?;
        check_positive("sigma", sd)?;
        check_finite("tau", shift)?;
        Ok(Distribution::NormalMixture { mean, sd, shift })
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability(p));
        }
        Ok(Distribution::Bernoulli { p })
    }

    pub fn beta(a: f64, b: f64) -> Result<Self> {
        check_positive("a", a)?;
        check_positive("b", b)?;
        Ok(Distribution::Beta { a, b })
    }

    pub fn scaled_inv_chi_sq(df: f64) -> Result<Self> {
        check_positive("df", df)?;
        Ok(Distribution::ScaledInvChiSq { df })
    }

    pub fn family(&self) -> Family {
        match self {
            Distribution::Normal { .. } => Family::Normal,
            Distribution::StudentT { .. } => Family::StudentT,
            Distribution::TwoPieceNormal { .. } => Family::TwoPieceNormal,
            Distribution::NormalMixture { .. } => Family::NormalMixture,
            Distribution::Bernoulli { .. } => Family::Bernoulli,
            Distribution::Beta { .. } => Family::Beta,
            Distribution::ScaledInvChiSq { .. } => Family::ScaledInvChiSq,
        }
    }

    /// Parameters in the family's storage order.
    pub fn params(&self) -> Vec<f64> {
        match *self {
            Distribution::Normal { mean, sd } => vec![mean, sd],
            Distribution::StudentT { df } => vec![df],
            Distribution::TwoPieceNormal {
                mode,
                sd_left,
                sd_right,
            } => vec![mode, sd_left, sd_right],
            Distribution::NormalMixture { mean, sd, shift } => vec![mean, sd, shift],
            Distribution::Bernoulli { p } => vec![p],
            Distribution::Beta { a, b } => vec![a, b],
            Distribution::ScaledInvChiSq { df } => vec![df],
        }
    }

    pub fn is_continuous(&self) -> bool {
        !matches!(self, Distribution::Bernoulli { .. })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Distribution::Normal { mean, sd } => norm_cdf((x - mean) / sd),
            Distribution::StudentT { df } => student_t_cdf(x, df),
            Distribution::TwoPieceNormal {
                mode,
                sd_left,
                sd_right,
            } => {
                let total = sd_left + sd_right;
                if x <= mode {
                    2.0 * sd_left / total * norm_cdf((x - mode) / sd_left)
                } else {
                    1.0 - 2.0 * sd_right / total * norm_sf((x - mode) / sd_right)
                }
            }
            Distribution::NormalMixture { mean, sd, shift } => {
                0.5 * norm_cdf((x - mean) / sd) + 0.5 * norm_cdf((x - mean - shift) / sd)
            }
            Distribution::Bernoulli { p } => {
                if x < 0.0 {
                    0.0
                } else if x < 1.0 {
                    1.0 - p
                } else {
                    1.0
                }
            }
            Distribution::Beta { a, b } => {
                if x <= 0.0 {
                    0.0
                } else if x >= 1.0 {
                    1.0
                } else {
                    beta_reg(a, b, x)
                }
            }
            Distribution::ScaledInvChiSq { df } => {
                if x <= 0.0 {
                    0.0
                } else if x.is_infinite() {
                    1.0
                } else {
                    gamma_ur(0.5 * df, 0.5 * df / x)
                }
            }
        }
    }

    /// Left limit `F(x-)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match *self {
            Distribution::Bernoulli { p } => {
                if x <= 0.0 {
                    0.0
                } else if x <= 1.0 {
                    1.0 - p
                } else {
                    1.0
                }
            }
            _ => self.cdf(x),
        }
    }

    /// Lebesgue density for continuous families; probability mass for Bernoulli.
    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Distribution::Normal { mean, sd } => norm_pdf((x - mean) / sd) / sd,
            Distribution::StudentT { df } => student_t_pdf(x, df),
            Distribution::TwoPieceNormal {
                mode,
                sd_left,
                sd_right,
            } => {
                let scale = if x <= mode { sd_left } else { sd_right };
                let u = (x - mode) / scale;
                (FRAC_2_PI).sqrt() / (sd_left + sd_right) * (-0.5 * u * u).exp()
            }
            Distribution::NormalMixture { mean, sd, shift } => {
                0.5 * (norm_pdf((x - mean) / sd) + norm_pdf((x - mean - shift) / sd)) / sd
            }
            Distribution::Bernoulli { p } => {
                if x == 1.0 {
                    p
                } else if x == 0.0 {
                    1.0 - p
                } else {
                    0.0
                }
            }
            Distribution::Beta { a, b } => {
                if x <= 0.0 || x >= 1.0 {
                    0.0
                } else {
                    ((a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_beta(a, b)).exp()
                }
            }
            Distribution::ScaledInvChiSq { df } => {
                if x <= 0.0 {
                    return 0.0;
                }
                let h = 0.5 * df;
                let chi = df / x;
                let log_chi_pdf = (h - 1.0) * chi.ln() - 0.5 * chi - h * 2f64.ln() - ln_gamma(h);
                (log_chi_pdf + df.ln() - 2.0 * x.ln()).exp()
            }
        }
    }

    /// Quantile function.
    ///
    /// Continuous families require `p` in `(0, 1)`. Bernoulli returns the
    /// generalized inverse `inf {x : F(x) >= p}` for `p` in `(0, 1]`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if let Distribution::Bernoulli { p: prob } = *self {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidProbability(p));
            }
            return Ok(if p <= 1.0 - prob { 0.0 } else { 1.0 });
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidProbability(p));
        }
        Ok(self.quantile_unchecked(p))
    }

    pub(crate) fn quantile_unchecked(&self, p: f64) -> f64 {
        match *self {
            Distribution::Normal { mean, sd } => mean + sd * norm_quantile(p),
            Distribution::TwoPieceNormal {
                mode,
                sd_left,
                sd_right,
            } => {
                let total = sd_left + sd_right;
                let split = sd_left / total;
                if p <= split {
                    mode + sd_left * norm_quantile(p * total / (2.0 * sd_left))
                } else {
                    let upper = (1.0 - p) * total / (2.0 * sd_right);
                    mode - sd_right * norm_quantile(upper)
                }
            }
            Distribution::NormalMixture { mean, sd, shift } => {
                if shift == 0.0 {
                    return mean + sd * norm_quantile(p);
                }
                // the quantile lies between the two component quantiles
                let z = norm_quantile(p);
                let lo = mean + shift.min(0.0) + sd * z;
                let hi = mean + shift.max(0.0) + sd * z;
                let start = 0.5 * (lo + hi);
                invert_cdf(
                    p,
                    |x| self.cdf(x),
                    |x| self.pdf(x),
                    start,
                    0.5 * (hi - lo) + 1e-3 * sd,
                    f64::NEG_INFINITY,
                    f64::INFINITY,
                )
            }
            Distribution::StudentT { df } => {
                if p == 0.5 {
                    return 0.0;
                }
                // solve on the lower half and reflect
                let lower = p.min(1.0 - p);
                let z = norm_quantile(lower);
                let start = if df > 2.0 { z * (df / (df - 2.0)).sqrt() } else { z };
                let x = invert_cdf(
                    lower,
                    |x| student_t_cdf(x, df),
                    |x| student_t_pdf(x, df),
                    start,
                    1.0,
                    f64::NEG_INFINITY,
                    0.0,
                );
                if p < 0.5 {
                    x
                } else {
                    -x
                }
            }
            Distribution::Beta { a, b } => invert_cdf(
                p,
                |x| self.cdf(x),
                |x| self.pdf(x),
                a / (a + b),
                0.25,
                0.0,
                1.0,
            ),
            Distribution::ScaledInvChiSq { .. } => invert_cdf(
                p,
                |x| self.cdf(x),
                |x| self.pdf(x),
                1.0,
                0.5,
                0.0,
                f64::INFINITY,
            ),
            Distribution::Bernoulli { p: prob } => {
                if p <= 1.0 - prob {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    pub fn mean(&self) -> Option<f64> {
        match *self {
            Distribution::Normal { mean, .. } => Some(mean),
            Distribution::StudentT { df } => (df > 1.0).then_some(0.0),
            Distribution::TwoPieceNormal {
                mode,
                sd_left,
                sd_right,
            } => Some(mode + FRAC_2_PI.sqrt() * (sd_right - sd_left)),
            Distribution::NormalMixture { mean, shift, .. } => Some(mean + 0.5 * shift),
            Distribution::Bernoulli { p } => Some(p),
            Distribution::Beta { a, b } => Some(a / (a + b)),
            Distribution::ScaledInvChiSq { df } => (df > 2.0).then(|| df / (df - 2.0)),
        }
    }

    pub fn variance(&self) -> Option<f64> {
        match *self {
            Distribution::Normal { sd, .. } => Some(sd * sd),
            Distribution::StudentT { df } => (df > 2.0).then(|| df / (df - 2.0)),
            Distribution::TwoPieceNormal {
                sd_left, sd_right, ..
            } => {
                let d = sd_right - sd_left;
                Some((1.0 - 2.0 / PI) * d * d + sd_left * sd_right)
            }
            Distribution::NormalMixture { sd, shift, .. } => Some(sd * sd + 0.25 * shift * shift),
            Distribution::Bernoulli { p } => Some(p * (1.0 - p)),
            Distribution::Beta { a, b } => {
                let s = a + b;
                Some(a * b / (s * s * (s + 1.0)))
            }
            Distribution::ScaledInvChiSq { df } => {
                (df > 4.0).then(|| 2.0 * df * df / ((df - 2.0).powi(2) * (df - 4.0)))
            }
        }
    }

    /// Predictive standard deviation, when the second moment is finite.
    pub fn std_dev(&self) -> Option<f64> {
        self.variance().map(f64::sqrt)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Normal { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            Distribution::StudentT { df } => StudentT::new(df)
                .expect("validated degrees of freedom")
                .sample(rng),
            Distribution::TwoPieceNormal {
                mode,
                sd_left,
                sd_right,
            } => {
                let z: f64 = StandardNormal.sample(rng);
                let left = rng.random::<f64>() * (sd_left + sd_right) < sd_left;
                if left {
                    mode - sd_left * z.abs()
                } else {
                    mode + sd_right * z.abs()
                }
            }
            Distribution::NormalMixture { mean, sd, shift } => {
                let z: f64 = StandardNormal.sample(rng);
                let offset = if rng.random::<bool>() { shift } else { 0.0 };
                mean + offset + sd * z
            }
            Distribution::Bernoulli { p } => {
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
            Distribution::Beta { a, b } => BetaSampler::new(a, b)
                .expect("validated shape parameters")
                .sample(rng),
            Distribution::ScaledInvChiSq { df } => {
                let chi: f64 = ChiSquared::new(df)
                    .expect("validated degrees of freedom")
                    .sample(rng);
                df / chi
            }
        }
    }
}
