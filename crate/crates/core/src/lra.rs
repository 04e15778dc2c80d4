//! Linear regression approach: regress `Φ⁻¹(Z)` on predictive parameters.
//!
//! Under the null the transformed PITs are iid standard normal and carry no
//! linear signal in the conditioning forecasters' parameters. The F-test
//! covers the mean, an Anderson-Darling test on the residuals covers the law,
//! and the two are combined by Holm's rule.

use serde::{Deserialize, Serialize};

use crate::dataset::PredictionDataset;
use crate::error::{Error, Result};
use crate::gof::ad_test_std_normal;
use crate::regression::{build_design, ols, Design, DroppedColumn};
use crate::special::{f_sf, norm_quantile};

/// PITs are clamped to `[PIT_CLAMP, 1 - PIT_CLAMP]` before `Φ⁻¹`.
pub const PIT_CLAMP: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LraReport {
    pub test: String,
    pub tested: usize,
    pub conditioning: Vec<usize>,
    pub n: usize,
    pub columns: Vec<String>,
    pub coef: Vec<f64>,
    pub f_statistic: f64,
    pub df_num: usize,
    pub df_den: usize,
    pub p_f: f64,
    pub ad_statistic: f64,
    pub p_normal: f64,
    pub p_adjust: f64,
    pub dropped: Vec<DroppedColumn>,
    /// Number of PITs moved by the clamp.
    pub clamped: usize,
}

impl LraReport {
    pub fn reject(&self, alpha: f64) -> bool {
        self.p_adjust <= alpha
    }
}

/// Intercept plus every parameter column of the forecasters in `j_set`,
/// forecaster by forecaster, screened for constant and dependent columns.
pub fn lra_design(ds: &PredictionDataset, j_set: &[usize]) -> Result<Design> {
    ds.check_indices(j_set)?;
    let mut candidates = Vec::new();
    for &j in j_set {
        let f = ds.forecaster(j)?;
        for (c, name) in f.family().param_names().iter().enumerate() {
            candidates.push((format!("{}_{}", f.label(), name), f.param_column(c)));
        }
    }
    build_design(ds.n(), candidates)
}

/// Runs the test for forecaster `i` (0-based) conditioning on `j_set`.
pub fn lra_test(ds: &PredictionDataset, i: usize, j_set: &[usize]) -> Result<LraReport> {
    let design = lra_design(ds, j_set)?;
    let z = ds.pit_series(i)?.values;
    let mut clamped = 0;
    let y: Vec<f64> = z
        .iter()
        .map(|&p| {
            let c = p.clamp(PIT_CLAMP, 1.0 - PIT_CLAMP);
            if c != p {
                clamped += 1;
            }
            norm_quantile(c)
        })
        .collect();
    let n = ds.n();
    let p = design.ncols();
    if n <= p {
        return Err(Error::TooShort { needed: p + 1, got: n });
    }
    let fit = ols(&design.matrix, &y)?;
    let df_den = n - p;
    let sigma2 = fit.rss / df_den as f64;
    if !(sigma2 > 0.0) {
        return Err(Error::DegenerateVariance("residual variance is zero".into()));
    }
    let f_statistic = fit.fitted.norm_squared() / (p as f64 * sigma2);
    let p_f = f_sf(f_statistic, p as f64, df_den as f64)?;
    let ad = ad_test_std_normal(fit.residuals.as_slice())?;
    let p_adjust = (2.0 * p_f.min(ad.p_value)).min(1.0);
    Ok(LraReport {
        test: "lra".into(),
        tested: i,
        conditioning: j_set.to_vec(),
        n,
        columns: design.names,
        coef: fit.coef.iter().copied().collect(),
        f_statistic,
        df_num: p,
        df_den,
        p_f,
        ad_statistic: ad.statistic,
        p_normal: ad.p_value,
        p_adjust,
        dropped: design.dropped,
        clamped,
    })
}
