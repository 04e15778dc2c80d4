//! Forecast–observation data and probability integral transforms.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{Distribution, Family};
use crate::error::{Error, Result};
use crate::rng;

/// One forecaster: a label and one predictive distribution per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecaster {
    label: String,
    family: Family,
    forecasts: Vec<Distribution>,
}

impl Forecaster {
    pub fn new(label: impl Into<String>, family: Family, forecasts: Vec<Distribution>) -> Result<Self> {
        if let Some(d) = forecasts.iter().find(|d| d.family() != family) {
            return Err(Error::InvalidParameter(format!(
                "forecast of family {} in a {} forecaster",
                d.family(),
                family
            )));
        }
        Ok(Forecaster {
            label: label.into(),
            family,
            forecasts,
        })
    }

    /// Builds a forecaster from per-row parameter vectors in storage order.
    pub fn from_params(label: impl Into<String>, family: Family, rows: &[Vec<f64>]) -> Result<Self> {
        let forecasts = rows
            .iter()
            .enumerate()
            .map(|(t, p)| {
                family.distribution(p).map_err(|e| match e {
                    Error::InvalidParameter(msg) => Error::InvalidParameter(format!("row {t}: {msg}")),
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Forecaster {
            label: label.into(),
            family,
            forecasts,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn forecasts(&self) -> &[Distribution] {
        &self.forecasts
    }

    pub fn len(&self) -> usize {
        self.forecasts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forecasts.is_empty()
    }

    /// Values of parameter `j` across rows.
    pub fn param_column(&self, j: usize) -> Vec<f64> {
        self.forecasts.iter().map(|d| d.params()[j]).collect()
    }
}

/// Rows of (forecasts of k forecasters, outcome y, PIT randomizer v).
///
/// Immutable after construction. The randomizers are stored with the data so
/// every test and diagnostic sees the same PIT values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionDataset {
    forecasters: Vec<Forecaster>,
    y: Vec<f64>,
    v: Vec<f64>,
}

/// PIT values of one forecaster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitSeries {
    pub forecaster: usize,
    pub values: Vec<f64>,
}

/// Randomized PIT `F(y-) + v (F(y) - F(y-))`.
pub fn pit(d: &Distribution, y: f64, v: f64) -> f64 {
    if d.is_continuous() {
        return d.cdf(y);
    }
    let lo = d.cdf_left(y);
    (lo + v * (d.cdf(y) - lo)).clamp(0.0, 1.0)
}

impl PredictionDataset {
    pub fn new(forecasters: Vec<Forecaster>, y: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if forecasters.is_empty() {
            return Err(Error::InvalidParameter("at least one forecaster is required".into()));
        }
        if y.is_empty() {
            return Err(Error::TooShort { needed: 1, got: 0 });
        }
        let n = y.len();
        if v.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} randomizers for {} outcomes",
                v.len(),
                n
            )));
        }
        for f in &forecasters {
            if f.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "forecaster {} has {} rows, expected {}",
                    f.label,
                    f.len(),
                    n
                )));
            }
        }
        if y.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        if let Some(&bad) = v.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::InvalidProbability(bad));
        }
        Ok(PredictionDataset { forecasters, y, v })
    }

    /// Same as [`new`](Self::new) with randomizers drawn once from `seed`.
    pub fn with_seeded_randomizers(forecasters: Vec<Forecaster>, y: Vec<f64>, seed: u64) -> Result<Self> {
        let mut r = rng::stream(seed, 0);
        let v = (0..y.len()).map(|_| r.random::<f64>()).collect();
        Self::new(forecasters, y, v)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn k(&self) -> usize {
        self.forecasters.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn forecasters(&self) -> &[Forecaster] {
        &self.forecasters
    }

    pub fn forecaster(&self, i: usize) -> Result<&Forecaster> {
        self.forecasters.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            count: self.forecasters.len(),
        })
    }

    pub(crate) fn check_indices(&self, idx: &[usize]) -> Result<()> {
        for &i in idx {
            self.forecaster(i)?;
        }
        Ok(())
    }

    pub fn pit_series(&self, i: usize) -> Result<PitSeries> {
        let f = self.forecaster(i)?;
        let values = f
            .forecasts
            .iter()
            .zip(&self.y)
            .zip(&self.v)
            .map(|((d, &y), &v)| pit(d, y, v))
            .collect();
        Ok(PitSeries { forecaster: i, values })
    }

    /// N x |J| matrix of quantiles of each forecaster in `j_set` at level `z`.
    pub fn forecast_quantile_matrix(&self, j_set: &[usize], z: f64) -> Result<DMatrix<f64>> {
        if !(z > 0.0 && z < 1.0) {
            return Err(Error::InvalidProbability(z));
        }
        self.check_indices(j_set)?;
        let n = self.n();
        let mut m = DMatrix::zeros(n, j_set.len());
        for (c, &j) in j_set.iter().enumerate() {
            for (t, d) in self.forecasters[j].forecasts.iter().enumerate() {
                m[(t, c)] = d.quantile_unchecked(z);
            }
        }
        Ok(m)
    }

    /// Returns a copy keeping only the rows in `rows`, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&t| t >= self.n()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                count: self.n(),
            });
        }
        let forecasters = self
            .forecasters
            .iter()
            .map(|f| Forecaster {
                label: f.label.clone(),
                family: f.family,
                forecasts: rows.iter().map(|&t| f.forecasts[t]).collect(),
            })
            .collect();
        Self::new(
            forecasters,
            rows.iter().map(|&t| self.y[t]).collect(),
            rows.iter().map(|&t| self.v[t]).collect(),
        )
    }
}
