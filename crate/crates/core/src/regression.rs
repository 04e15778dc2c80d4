//! Design-matrix assembly and least-squares fits shared by the tests.
//!
//! Candidate columns are screened in order. A column is dropped when it is
//! constant across rows or when it lies in the span of the columns already
//! kept (which includes exact duplicates and sign flips). The intercept is
//! always kept.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Range below which a column counts as constant.
pub const CONSTANT_TOL: f64 = 1e-12;
/// Relative residual norm below which a column counts as linearly dependent.
pub const COLLINEAR_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Constant,
    Collinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub name: String,
    pub reason: DropReason,
}

/// Screened design: intercept first, then the retained candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub names: Vec<String>,
    pub matrix: DMatrix<f64>,
    pub dropped: Vec<DroppedColumn>,
}

impl Design {
    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Decides which candidate columns to keep; returns their indices and the drop log.
pub fn screen_columns(n: usize, candidates: &[(String, Vec<f64>)]) -> (Vec<usize>, Vec<DroppedColumn>) {
    let mut basis: Vec<Vec<f64>> = vec![vec![1.0 / (n as f64).sqrt(); n]];
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (idx, (name, col)) in candidates.iter().enumerate() {
        let (lo, hi) = col
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        if hi - lo < CONSTANT_TOL {
            dropped.push(DroppedColumn {
                name: name.clone(),
                reason: DropReason::Constant,
            });
            continue;
        }
        let norm = dot(col, col).sqrt();
        let mut r = col.clone();
        // two Gram-Schmidt sweeps keep the residual accurate
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &r);
                for (ri, qi) in r.iter_mut().zip(q) {
                    *ri -= c * qi;
                }
            }
        }
        let rn = dot(&r, &r).sqrt();
        if rn <= COLLINEAR_TOL * norm {
            dropped.push(DroppedColumn {
                name: name.clone(),
                reason: DropReason::Collinear,
            });
            continue;
        }
        r.iter_mut().for_each(|x| *x /= rn);
        basis.push(r);
        kept.push(idx);
    }
    (kept, dropped)
}

/// Builds the screened design `[1 | kept candidates]`.
pub fn build_design(n: usize, candidates: Vec<(String, Vec<f64>)>) -> Result<Design> {
    for (name, col) in &candidates {
        if col.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "column {name} has {} rows, expected {n}",
                col.len()
            )));
        }
    }
    let (kept, dropped) = screen_columns(n, &candidates);
    let p = 1 + kept.len();
    let mut matrix = DMatrix::from_element(n, p, 1.0);
    let mut names = vec!["intercept".to_string()];
    for (c, &idx) in kept.iter().enumerate() {
        let (name, col) = &candidates[idx];
        matrix.column_mut(c + 1).copy_from_slice(col);
        names.push(name.clone());
    }
    Ok(Design {
        names,
        matrix,
        dropped,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Least-squares fit with the quantities the tests need.
#[derive(Debug, Clone, PartialEq)]
pub struct LsFit {
    pub coef: DVector<f64>,
    pub fitted: DVector<f64>,
    pub residuals: DVector<f64>,
    /// Residual sum of squares (weighted for WLS).
    pub rss: f64,
    /// `(X' W X)^{-1}`.
    pub xtx_inv: DMatrix<f64>,
}

/// Ordinary least squares by Householder QR.
pub fn ols(x: &DMatrix<f64>, y: &[f64]) -> Result<LsFit> {
    wls(x, y, None)
}

/// Weighted least squares minimizing `sum w_t (y_t - x_t' b)^2` by QR of the
/// row-scaled problem. `weights = None` gives OLS.
pub fn wls(x: &DMatrix<f64>, y: &[f64], weights: Option<&[f64]>) -> Result<LsFit> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!("{} responses for {n} rows", y.len())));
    }
    if n <= p {
        return Err(Error::TooShort { needed: p + 1, got: n });
    }
    let sw: Vec<f64> = match weights {
        Some(w) => {
            if w.len() != n {
                return Err(Error::DimensionMismatch(format!("{} weights for {n} rows", w.len())));
            }
            if w.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidParameter("weights must be positive and finite".into()));
            }
            w.iter().map(|v| v.sqrt()).collect()
        }
        None => vec![1.0; n],
    };
    let xs = DMatrix::from_fn(n, p, |t, j| x[(t, j)] * sw[t]);
    let ys = DVector::from_iterator(n, y.iter().zip(&sw).map(|(a, b)| a * b));
    let qr = xs.clone().qr();
    let r = qr.r();
    let scale = (0..p).map(|j| xs.column(j).norm()).fold(0.0, f64::max);
    for j in 0..p {
        if r[(j, j)].abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::RankDeficient(format!("design column {j} is dependent")));
        }
    }
    let qty = qr.q().transpose() * &ys;
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient("triangular solve failed".into()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::RankDeficient("triangular inverse failed".into()))?;
    let xtx_inv = &r_inv * r_inv.transpose();
    let fitted = x * &coef;
    let residuals = DVector::from_iterator(n, y.iter().zip(fitted.iter()).map(|(a, b)| a - b));
    let rss = residuals
        .iter()
        .zip(&sw)
        .map(|(e, s)| (e * s).powi(2))
        .sum();
    Ok(LsFit {
        coef,
        fitted,
        residuals,
        rss,
        xtx_inv,
    })
}
