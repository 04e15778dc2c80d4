//! Firth-penalized logistic regression.
//!
//! Maximizes `l(β) + ½ log det I(β)` with `I(β) = X'WX` by Newton steps on the
//! modified score `U*(β) = X'(b − π + h ⊙ (½ − π))`, where `h` holds the hat
//! diagonals of `W^{½} X I(β)^{-1} X' W^{½}`. The penalty keeps estimates
//! finite under separation.
//!
//! [`FirthSolver`] owns all scratch space so repeated fits on one design do
//! not allocate; the bootstrap in [`crate::cep`] relies on that.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::logistic;

/// Fitted probabilities are clamped to this distance from 0 and 1.
pub const PROB_CLAMP: f64 = 1e-12;
/// Convergence threshold on `max |U*|`.
pub const SCORE_TOL: f64 = 1e-6;
pub const MAX_ITER: usize = 100;
pub const MAX_HALVINGS: usize = 20;
/// Largest change of a single coefficient per Newton step.
pub const MAX_STEP: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirthFit {
    pub beta: Vec<f64>,
    pub penalized_loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    /// `max |U*(β̂)|`.
    pub max_score: f64,
}

/// Reusable Firth fitter for one design matrix.
#[derive(Debug, Clone)]
pub struct FirthSolver {
    n: usize,
    p: usize,
    /// Row-major copy of the design.
    x: Vec<f64>,
    beta: Vec<f64>,
    trial: Vec<f64>,
    step: Vec<f64>,
    score: Vec<f64>,
    prob: Vec<f64>,
    trial_prob: Vec<f64>,
    chol: Vec<f64>,
    trial_chol: Vec<f64>,
    linv: Vec<f64>,
}

impl FirthSolver {
    pub fn new(x: &DMatrix<f64>) -> Self {
        let (n, p) = x.shape();
        let mut rows = Vec::with_capacity(n * p);
        for t in 0..n {
            for j in 0..p {
                rows.push(x[(t, j)]);
            }
        }
        Self::from_row_major(rows, n, p)
    }

    pub fn from_row_major(x: Vec<f64>, n: usize, p: usize) -> Self {
        assert_eq!(x.len(), n * p, "row-major buffer has wrong length");
        FirthSolver {
            n,
            p,
            x,
            beta: vec![0.0; p],
            trial: vec![0.0; p],
            step: vec![0.0; p],
            score: vec![0.0; p],
            prob: vec![0.0; n],
            trial_prob: vec![0.0; n],
            chol: vec![0.0; p * p],
            trial_chol: vec![0.0; p * p],
            linv: vec![0.0; p * p],
        }
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.p
    }

    /// Evaluates `ℓ_p(beta)`, leaving fitted probabilities and the Cholesky
    /// factor of `I(beta)` in `prob_out` / `chol_out`.
    fn evaluate(
        x: &[f64],
        n: usize,
        p: usize,
        b: &[f64],
        beta: &[f64],
        prob_out: &mut [f64],
        chol_out: &mut [f64],
    ) -> Result<f64> {
        let ll = match p {
            2 => accumulate_fixed::<2>(x, b, beta, prob_out, chol_out),
            3 => accumulate_fixed::<3>(x, b, beta, prob_out, chol_out),
            4 => accumulate_fixed::<4>(x, b, beta, prob_out, chol_out),
            _ => accumulate_dyn(x, n, p, b, beta, prob_out, chol_out),
        };
        let logdet = cholesky_in_place(chol_out, p)?;
        Ok(ll + 0.5 * logdet)
    }

    /// Penalized log-likelihood at `beta`.
    pub fn penalized_loglik(&mut self, b: &[f64], beta: &[f64]) -> Result<f64> {
        self.check(b, beta)?;
        Self::evaluate(&self.x, self.n, self.p, b, beta, &mut self.trial_prob, &mut self.trial_chol)
    }

    /// Modified score at the current state; returns `max |U*|`.
    fn modified_score(&mut self, b: &[f64]) -> f64 {
        let p = self.p;
        invert_lower(&self.chol, p, &mut self.linv);
        match p {
            2 => score_fixed::<2>(&self.x, b, &self.prob, &self.linv, &mut self.score),
            3 => score_fixed::<3>(&self.x, b, &self.prob, &self.linv, &mut self.score),
            4 => score_fixed::<4>(&self.x, b, &self.prob, &self.linv, &mut self.score),
            _ => score_dyn(&self.x, p, b, &self.prob, &self.linv, &mut self.score),
        }
        self.score.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    fn check(&self, b: &[f64], beta: &[f64]) -> Result<()> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "{} responses for {} rows",
                b.len(),
                self.n
            )));
        }
        if beta.len() != self.p {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} columns",
                beta.len(),
                self.p
            )));
        }
        Ok(())
    }

    /// Fits from `start`; returns `(ℓ_p(start), fit)`.
    pub fn fit_from(&mut self, b: &[f64], start: &[f64]) -> Result<(f64, FirthFit)> {
        self.check(b, start)?;
        let (n, p) = (self.n, self.p);
        self.beta.copy_from_slice(start);
        let start_lp = Self::evaluate(&self.x, n, p, b, &self.beta, &mut self.prob, &mut self.chol)?;
        let mut lp = start_lp;
        let mut converged = false;
        let mut iterations = 0;
        let mut max_score = self.modified_score(b);
        while iterations < MAX_ITER {
            if max_score <= SCORE_TOL {
                converged = true;
                break;
            }
            iterations += 1;
            // Newton direction I^{-1} U*
            self.step.copy_from_slice(&self.score);
            forward_substitute_in_place(&self.chol, p, &mut self.step);
            backward_substitute_in_place(&self.chol, p, &mut self.step);
            let largest = self.step.iter().fold(0.0, |m: f64, s| m.max(s.abs()));
            if largest > MAX_STEP {
                let s = MAX_STEP / largest;
                self.step.iter_mut().for_each(|v| *v *= s);
            }
            let mut accepted = false;
            for _ in 0..=MAX_HALVINGS {
                for j in 0..p {
                    self.trial[j] = self.beta[j] + self.step[j];
                }
                match Self::evaluate(&self.x, n, p, b, &self.trial, &mut self.trial_prob, &mut self.trial_chol) {
                    // rounding-level decreases are accepted near the optimum
                    Ok(v) if v >= lp - 1e-12 * lp.abs().max(1.0) => {
                        lp = v;
                        accepted = true;
                        break;
                    }
                    Ok(_) | Err(Error::DegenerateInformation) => {
                        self.step.iter_mut().for_each(|v| *v *= 0.5);
                    }
                    Err(e) => return Err(e),
                }
            }
            if !accepted {
                break;
            }
            std::mem::swap(&mut self.beta, &mut self.trial);
            std::mem::swap(&mut self.prob, &mut self.trial_prob);
            std::mem::swap(&mut self.chol, &mut self.trial_chol);
            max_score = self.modified_score(b);
        }
        if !converged && max_score <= SCORE_TOL {
            converged = true;
        }
        Ok((
            start_lp,
            FirthFit {
                beta: self.beta.clone(),
                penalized_loglik: lp,
                converged,
                iterations,
                max_score,
            },
        ))
    }

    /// Like [`fit_from`](Self::fit_from) but returns only `(ℓ_p(start), ℓ_p(β̂))`.
    pub fn fit_loglik_from(&mut self, b: &[f64], start: &[f64]) -> Result<(f64, f64)> {
        let (s, fit) = self.fit_from(b, start)?;
        Ok((s, fit.penalized_loglik))
    }
}

/// In-place Cholesky of the lower triangle of a row-major `p x p` matrix.
/// Returns `log det`.
fn cholesky_in_place(a: &mut [f64], p: usize) -> Result<f64> {
    let mut logdet = 0.0;
    for j in 0..p {
        let mut d = a[j * p + j];
        for k in 0..j {
            d -= a[j * p + k] * a[j * p + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::DegenerateInformation);
        }
        let l = d.sqrt();
        a[j * p + j] = l;
        logdet += 2.0 * l.ln();
        for i in j + 1..p {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= a[i * p + k] * a[j * p + k];
            }
            a[i * p + j] = s / l;
        }
    }
    Ok(logdet)
}

#[inline]
fn row_loglik(eta: f64, bt: f64) -> (f64, f64) {
    let pi = logistic(eta).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    (pi, if bt > 0.5 { pi.ln() } else { (1.0 - pi).ln() })
}

/// Log-likelihood, fitted probabilities and the lower triangle of `X'WX`.
fn accumulate_fixed<const P: usize>(
    x: &[f64],
    b: &[f64],
    beta: &[f64],
    prob_out: &mut [f64],
    info_out: &mut [f64],
) -> f64 {
    let beta: [f64; P] = beta.try_into().expect("coefficient length");
    let mut a = [[0.0; P]; P];
    let mut ll = 0.0;
    for ((row, &bt), pr) in x.chunks_exact(P).zip(b).zip(prob_out.iter_mut()) {
        let row: &[f64; P] = row.try_into().expect("row length");
        let mut eta = 0.0;
        for j in 0..P {
            eta += row[j] * beta[j];
        }
        let (pi, l) = row_loglik(eta, bt);
        *pr = pi;
        ll += l;
        let w = pi * (1.0 - pi);
        for r in 0..P {
            let wr = w * row[r];
            for c in 0..=r {
                a[r][c] += wr * row[c];
            }
        }
    }
    for r in 0..P {
        for c in 0..P {
            info_out[r * P + c] = if c <= r { a[r][c] } else { 0.0 };
        }
    }
    ll
}

fn accumulate_dyn(
    x: &[f64],
    n: usize,
    p: usize,
    b: &[f64],
    beta: &[f64],
    prob_out: &mut [f64],
    info_out: &mut [f64],
) -> f64 {
    info_out.iter_mut().for_each(|c| *c = 0.0);
    let mut ll = 0.0;
    for t in 0..n {
        let row = &x[t * p..(t + 1) * p];
        let eta: f64 = row.iter().zip(beta).map(|(a, c)| a * c).sum();
        let (pi, l) = row_loglik(eta, b[t]);
        prob_out[t] = pi;
        ll += l;
        let w = pi * (1.0 - pi);
        for r in 0..p {
            let wr = w * row[r];
            let dst = &mut info_out[r * p..r * p + r + 1];
            for (d, &xc) in dst.iter_mut().zip(&row[..=r]) {
                *d += wr * xc;
            }
        }
    }
    ll
}

/// `X'(b - π + h ⊙ (½ - π))` with `h_t = w_t ‖L⁻¹ x_t‖²`.
fn score_fixed<const P: usize>(x: &[f64], b: &[f64], prob: &[f64], linv: &[f64], out: &mut [f64]) {
    let mut li = [[0.0; P]; P];
    for r in 0..P {
        for c in 0..=r {
            li[r][c] = linv[r * P + c];
        }
    }
    let mut s = [0.0; P];
    for ((row, &bt), &pi) in x.chunks_exact(P).zip(b).zip(prob) {
        let row: &[f64; P] = row.try_into().expect("row length");
        let mut q = 0.0;
        for r in 0..P {
            let mut u = 0.0;
            for c in 0..=r {
                u += li[r][c] * row[c];
            }
            q += u * u;
        }
        let h = pi * (1.0 - pi) * q;
        let resid = bt - pi + h * (0.5 - pi);
        for j in 0..P {
            s[j] += row[j] * resid;
        }
    }
    out.copy_from_slice(&s);
}

fn score_dyn(x: &[f64], p: usize, b: &[f64], prob: &[f64], linv: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|s| *s = 0.0);
    for ((row, &bt), &pi) in x.chunks_exact(p).zip(b).zip(prob) {
        let mut q = 0.0;
        for r in 0..p {
            let u: f64 = linv[r * p..r * p + r + 1].iter().zip(row).map(|(a, c)| a * c).sum();
            q += u * u;
        }
        let h = pi * (1.0 - pi) * q;
        let resid = bt - pi + h * (0.5 - pi);
        for (s, &xv) in out.iter_mut().zip(row) {
            *s += xv * resid;
        }
    }
}

/// Inverse of a lower-triangular row-major `p x p` factor.
fn invert_lower(l: &[f64], p: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for j in 0..p {
        out[j * p + j] = 1.0 / l[j * p + j];
        for i in j + 1..p {
            let mut s = 0.0;
            for k in j..i {
                s -= l[i * p + k] * out[k * p + j];
            }
            out[i * p + j] = s / l[i * p + i];
        }
    }
}

fn forward_substitute_in_place(l: &[f64], p: usize, v: &mut [f64]) {
    for i in 0..p {
        let mut s = v[i];
        for k in 0..i {
            s -= l[i * p + k] * v[k];
        }
        v[i] = s / l[i * p + i];
    }
}

fn backward_substitute_in_place(l: &[f64], p: usize, v: &mut [f64]) {
    for i in (0..p).rev() {
        let mut s = v[i];
        for k in i + 1..p {
            s -= l[k * p + i] * v[k];
        }
        v[i] = s / l[i * p + i];
    }
}

/// `ℓ(β) + ½ log det I(β)`.
pub fn penalized_loglik(x: &DMatrix<f64>, b: &[f64], beta: &[f64]) -> Result<f64> {
    FirthSolver::new(x).penalized_loglik(b, beta)
}

/// Firth fit started at zero.
pub fn firth_fit(x: &DMatrix<f64>, b: &[f64]) -> Result<FirthFit> {
    let p = x.ncols();
    if p == 0 || x.nrows() == 0 {
        return Err(Error::InvalidParameter("empty design".into()));
    }
    let rank = x.clone().svd(false, false).rank(1e-10 * x.abs().max().max(1.0));
    if rank < p {
        return Err(Error::RankDeficient(format!("design has rank {rank} < {p}")));
    }
    Ok(FirthSolver::new(x).fit_from(b, &vec![0.0; p])?.1)
}

/// Penalized log-likelihood of an intercept-only model at success probability `q`.
pub(crate) fn intercept_only_loglik(n: usize, successes: usize, q: f64) -> f64 {
    let q = q.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let s = successes as f64;
    let nf = n as f64;
    s * q.ln() + (nf - s) * (1.0 - q).ln() + 0.5 * (nf * q * (1.0 - q)).ln()
}

/// Closed-form Firth estimate for the intercept-only model: `(s + ½)/(n + 1)`.
pub(crate) fn intercept_only_fit(n: usize, successes: usize) -> (f64, f64) {
    let q = (successes as f64 + 0.5) / (n as f64 + 1.0);
    (q, intercept_only_loglik(n, successes, q))
}
