//! Goodness-of-fit statistics against fully specified laws.
//!
//! The Anderson–Darling test here is the case-0 variant: the null law is the
//! standard normal with no estimated parameters, and the p-value comes from
//! the asymptotic distribution of A² (Marsaglia & Marsaglia, 2004).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{chi2_sf, norm_cdf, norm_sf};

/// Statistic and p-value of a goodness-of-fit test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Asymptotic CDF of the case-0 Anderson–Darling statistic.
fn ad_inf_cdf(z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    if z < 2.0 {
        (-1.233_714_1 / z).exp() / z.sqrt()
            * (2.000_12
                + (0.247_105
                    - (0.064_982_1 - (0.034_796_2 - (0.011_672 - 0.001_686_91 * z) * z) * z) * z)
                    * z)
    } else {
        (-(1.077_6
            - (2.306_95 - (0.434_24 - (0.082_433 - (0.008_056 - 0.000_314_6 * z) * z) * z) * z)
                * z)
            .exp())
        .exp()
    }
}

/// Anderson–Darling test of `sample` against N(0, 1).
pub fn ad_test_std_normal(sample: &[f64]) -> Result<GofResult> {
    const MIN_LEN: usize = 8;
    if sample.len() < MIN_LEN {
        return Err(Error::TooShort {
            needed: MIN_LEN,
            got: sample.len(),
        });
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut acc = 0.0;
    for i in 0..n {
        // ln Φ(x_(i)) and ln(1 − Φ(x_(n−1−i))) from the accurate tails
        let lo = norm_cdf(sorted[i]).max(f64::MIN_POSITIVE).ln();
        let hi = norm_sf(sorted[n - 1 - i]).max(f64::MIN_POSITIVE).ln();
        acc += (2 * i + 1) as f64 * (lo + hi);
    }
    let a2 = -(n as f64) - acc / n as f64;
    let p = (1.0 - ad_inf_cdf(a2)).clamp(0.0, 1.0);
    Ok(GofResult {
        statistic: a2,
        p_value: p,
    })
}

/// Kolmogorov–Smirnov distance between the empirical law of `values` and U(0, 1).
pub fn ks_uniform_statistic(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let u = u.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - u).max(u - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// KS test against U(0, 1) with the Kolmogorov limiting law (Stephens' correction).
pub fn ks_test_uniform(values: &[f64]) -> Result<GofResult> {
    if values.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let d = ks_uniform_statistic(values);
    let sn = (values.len() as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    Ok(GofResult {
        statistic: d,
        p_value: kolmogorov_sf(lambda),
    })
}

fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Pearson chi-square test that `counts` are equally likely cells.
pub fn chi_square_uniform(counts: &[u64]) -> Result<GofResult> {
    if counts.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: counts.len(),
        });
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidParameter("no observations".into()));
    }
    let expected = total as f64 / counts.len() as f64;
    let stat = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum::<f64>();
    Ok(GofResult {
        statistic: stat,
        p_value: chi2_sf(stat, (counts.len() - 1) as f64)?,
    })
}

/// Pearson chi-square test of `counts` against cell probabilities `probs`.
pub fn chi_square_gof(counts: &[u64], probs: &[f64]) -> Result<GofResult> {
    if counts.len() != probs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} counts for {} cells",
            counts.len(),
            probs.len()
        )));
    }
    if counts.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: counts.len(),
        });
    }
    let total: u64 = counts.iter().sum();
    let mut stat = 0.0;
    for (&c, &p) in counts.iter().zip(probs) {
        if !(p > 0.0) {
            return Err(Error::InvalidProbability(p));
        }
        let e = p * total as f64;
        stat += (c as f64 - e).powi(2) / e;
    }
    Ok(GofResult {
        statistic: stat,
        p_value: chi2_sf(stat, (counts.len() - 1) as f64)?,
    })
}
