//! Conditional exceedance probability (CEP) test.
//!
//! For each level `z` on a grid, the indicators `B_t = 1{Z_t <= z}` of the
//! tested forecaster's PIT are regressed on the competitors' `z`-quantiles
//! with a Firth-penalized logit model and compared against the null
//! `β = (logit z, 0, ..., 0)` by a likelihood-ratio statistic. The pointwise
//! p-values are combined with the Westfall–Young step-down min-p bootstrap,
//! which resamples indicators as `1{U_t <= z}` with one uniform vector shared
//! by all levels of a replicate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::PredictionDataset;
use crate::error::{Error, Result};
use crate::firth::{intercept_only_fit, intercept_only_loglik, FirthSolver};
use crate::regression::{build_design, DroppedColumn};
use crate::rng;
use crate::special::{chi2_sf, logit};
use rand::Rng;

/// Bootstrap size used in simulation studies.
pub const SIMULATION_BOOTSTRAP: usize = 500;
/// Bootstrap size for single-dataset analyses.
pub const DATA_BOOTSTRAP: usize = 20_000;

/// `z_m = {1 + (18/19) m} / 20`, `m = 0..19`.
pub fn simulation_grid() -> Vec<f64> {
    (0..20).map(|m| (1.0 + 18.0 / 19.0 * m as f64) / 20.0).collect()
}

/// `z_m = {1 + (148/149) m} / 150`, `m = 0..149`.
pub fn data_grid() -> Vec<f64> {
    (0..150).map(|m| (1.0 + 148.0 / 149.0 * m as f64) / 150.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CepConfig {
    pub grid: Vec<f64>,
    /// Bootstrap replicates `L`.
    pub bootstrap: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl CepConfig {
    pub fn simulation(seed: u64) -> Self {
        CepConfig {
            grid: simulation_grid(),
            bootstrap: SIMULATION_BOOTSTRAP,
            alpha: 0.05,
            seed,
        }
    }

    pub fn data(seed: u64) -> Self {
        CepConfig {
            grid: data_grid(),
            bootstrap: DATA_BOOTSTRAP,
            alpha: 0.05,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_grid(&self.grid)?;
        if self.bootstrap == 0 {
            return Err(Error::InvalidParameter("bootstrap count must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidProbability(self.alpha));
        }
        Ok(())
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty level grid".into()));
    }
    if let Some(&z) = grid.iter().find(|z| !(**z > 0.0 && **z < 1.0)) {
        return Err(Error::InvalidProbability(z));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("level grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Result at one level `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CepPoint {
    pub z: f64,
    /// Names of the retained design columns, intercept first.
    pub columns: Vec<String>,
    pub beta: Vec<f64>,
    pub statistic: f64,
    pub df: usize,
    pub p_raw: f64,
    /// Westfall–Young adjusted p-value; absent for a lone pointwise test.
    pub p_adjusted: Option<f64>,
    pub converged: bool,
    pub dropped: Vec<DroppedColumn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CepReport {
    pub test: String,
    pub tested: usize,
    pub conditioning: Vec<usize>,
    pub n: usize,
    pub alpha: f64,
    pub bootstrap: usize,
    pub seed: u64,
    pub points: Vec<CepPoint>,
    pub min_adjusted: f64,
    pub reject: bool,
}

impl CepReport {
    /// `(z, adjusted p)` pairs.
    pub fn curve(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .map(|p| (p.z, p.p_adjusted.unwrap_or(p.p_raw)))
            .collect()
    }
}

/// Global decision computed with early stopping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CepDecision {
    pub reject: bool,
    /// Bootstrap replicates evaluated before the decision was fixed.
    pub replicates_used: usize,
}

#[derive(Debug, Clone)]
enum Model {
    InterceptOnly,
    Firth { solver: FirthSolver, gamma: Vec<f64> },
}

#[derive(Debug, Clone)]
struct Level {
    z: f64,
    columns: Vec<String>,
    dropped: Vec<DroppedColumn>,
    model: Model,
}

impl Level {
    fn df(&self) -> usize {
        self.columns.len()
    }

    /// Returns `(T, p, β̂, converged)` for indicators `b`.
    fn evaluate(&mut self, b: &[f64], want_beta: bool) -> Result<(f64, f64, Vec<f64>, bool)> {
        let n = b.len();
        let (stat, beta, converged) = match &mut self.model {
            Model::InterceptOnly => {
                let s = b.iter().filter(|&&v| v > 0.5).count();
                let (q, lp_hat) = intercept_only_fit(n, s);
                let lp_null = intercept_only_loglik(n, s, self.z);
                let beta = if want_beta { vec![logit(q)] } else { Vec::new() };
                (2.0 * (lp_hat - lp_null), beta, true)
            }
            Model::Firth { solver, gamma } => {
                let (lp_null, fit) = solver.fit_from(b, gamma)?;
                (
                    2.0 * (fit.penalized_loglik - lp_null),
                    if want_beta { fit.beta } else { Vec::new() },
                    fit.converged,
                )
            }
        };
        let stat = stat.max(0.0);
        let p = chi2_sf(stat, self.df() as f64)?;
        Ok((stat, p, beta, converged))
    }
}

/// A CEP problem with its designs prepared once; reusable across bootstrap replicates.
#[derive(Debug, Clone)]
pub struct CepProblem {
    tested: usize,
    conditioning: Vec<usize>,
    pits: Vec<f64>,
    levels: Vec<Level>,
}

impl CepProblem {
    pub fn new(ds: &PredictionDataset, i: usize, j_set: &[usize], grid: &[f64]) -> Result<Self> {
        validate_grid(grid)?;
        ds.forecaster(i)?;
        ds.check_indices(j_set)?;
        let pits = ds.pit_series(i)?.values;
        let n = ds.n();
        let mut levels = Vec::with_capacity(grid.len());
        for &z in grid {
            let q = ds.forecast_quantile_matrix(j_set, z)?;
            let candidates = j_set
                .iter()
                .enumerate()
                .map(|(c, &j)| {
                    let label = ds.forecasters()[j].label();
                    (format!("{label}_quantile"), q.column(c).iter().copied().collect())
                })
                .collect();
            let design = build_design(n, candidates)?;
            let p = design.ncols();
            if n <= p {
                return Err(Error::TooShort { needed: p + 1, got: n });
            }
            let model = if p == 1 {
                Model::InterceptOnly
            } else {
                let mut gamma = vec![0.0; p];
                gamma[0] = logit(z);
                Model::Firth {
                    solver: FirthSolver::new(&design.matrix),
                    gamma,
                }
            };
            levels.push(Level {
                z,
                columns: design.names,
                dropped: design.dropped,
                model,
            });
        }
        Ok(CepProblem {
            tested: i,
            conditioning: j_set.to_vec(),
            pits,
            levels,
        })
    }

    pub fn grid(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.z).collect()
    }

    /// Pointwise results on the observed PITs.
    pub fn pointwise(&self) -> Result<Vec<CepPoint>> {
        let mut levels = self.levels.clone();
        let mut b = vec![0.0; self.pits.len()];
        levels
            .iter_mut()
            .map(|level| {
                for (bt, &zt) in b.iter_mut().zip(&self.pits) {
                    *bt = if zt <= level.z { 1.0 } else { 0.0 };
                }
                let (statistic, p_raw, beta, converged) = level.evaluate(&b, true)?;
                Ok(CepPoint {
                    z: level.z,
                    columns: level.columns.clone(),
                    beta,
                    statistic,
                    df: level.df(),
                    p_raw,
                    p_adjusted: None,
                    converged,
                    dropped: level.dropped.clone(),
                })
            })
            .collect()
    }

    /// Raw pointwise p-values.
    pub fn raw_pvalues(&self) -> Result<Vec<f64>> {
        Ok(self.pointwise()?.into_iter().map(|p| p.p_raw).collect())
    }

    fn bootstrap_into(
        &self,
        levels: &mut [Level],
        u: &mut [f64],
        b: &mut [f64],
        seed: u64,
        replicate: usize,
        out: &mut [f64],
    ) -> Result<()> {
        let mut r = rng::stream(seed, replicate as u64);
        for x in u.iter_mut() {
            *x = r.random::<f64>();
        }
        for (level, slot) in levels.iter_mut().zip(out.iter_mut()) {
            for (bt, &ut) in b.iter_mut().zip(u.iter()) {
                *bt = if ut <= level.z { 1.0 } else { 0.0 };
            }
            *slot = level.evaluate(b, false)?.1;
        }
        Ok(())
    }

    /// Pointwise p-values of bootstrap replicate `replicate` under `seed`.
    pub fn bootstrap_pvalues(&self, seed: u64, replicate: usize) -> Result<Vec<f64>> {
        let mut scratch = self.scratch();
        let mut out = vec![0.0; self.levels.len()];
        self.bootstrap_into(&mut scratch.0, &mut scratch.1, &mut scratch.2, seed, replicate, &mut out)?;
        Ok(out)
    }

    fn scratch(&self) -> (Vec<Level>, Vec<f64>, Vec<f64>) {
        let n = self.pits.len();
        (self.levels.clone(), vec![0.0; n], vec![0.0; n])
    }

    /// Pointwise p-values for replicates `range`, computed in parallel.
    fn bootstrap_chunk(&self, seed: u64, range: std::ops::Range<usize>) -> Result<Vec<Vec<f64>>> {
        let m = self.levels.len();
        range
            .into_par_iter()
            .map_init(
                || self.scratch(),
                |(levels, u, b), l| {
                    let mut out = vec![0.0; m];
                    self.bootstrap_into(levels, u, b, seed, l, &mut out)?;
                    Ok(out)
                },
            )
            .collect()
    }

    /// Full test report.
    pub fn run(&self, config: &CepConfig) -> Result<CepReport> {
        config.validate()?;
        let mut points = self.pointwise()?;
        let raw: Vec<f64> = points.iter().map(|p| p.p_raw).collect();
        let mut counter = StepDown::new(&raw);
        const CHUNK: usize = 64;
        let mut start = 0;
        while start < config.bootstrap {
            let end = (start + CHUNK).min(config.bootstrap);
            for pstar in self.bootstrap_chunk(config.seed, start..end)? {
                counter.add(&pstar);
            }
            start = end;
        }
        let adjusted = counter.adjusted();
        for (p, r) in points.iter_mut().zip(&adjusted) {
            p.p_adjusted = Some(*r);
        }
        let min_adjusted = adjusted.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(CepReport {
            test: "cep".into(),
            tested: self.tested,
            conditioning: self.conditioning.clone(),
            n: self.pits.len(),
            alpha: config.alpha,
            bootstrap: config.bootstrap,
            seed: config.seed,
            points,
            min_adjusted,
            reject: min_adjusted <= config.alpha,
        })
    }

    /// Global decision `min_m r_m <= alpha`, stopping as soon as every level's
    /// exceedance count guarantees `r_m > alpha`. Agrees exactly with
    /// [`run`](Self::run).
    pub fn decide(&self, config: &CepConfig) -> Result<CepDecision> {
        config.validate()?;
        let raw = self.raw_pvalues()?;
        let mut counter = StepDown::new(&raw);
        let total = config.bootstrap as f64;
        let mut start = 0;
        let mut chunk = 8;
        while start < config.bootstrap {
            let end = (start + chunk).min(config.bootstrap);
            for pstar in self.bootstrap_chunk(config.seed, start..end)? {
                counter.add(&pstar);
            }
            start = end;
            chunk = (chunk * 2).min(64);
            if counter.counts().iter().all(|&c| c as f64 / total > config.alpha) {
                return Ok(CepDecision {
                    reject: false,
                    replicates_used: start,
                });
            }
        }
        let reject = counter.adjusted().iter().any(|&r| r <= config.alpha);
        Ok(CepDecision {
            reject,
            replicates_used: config.bootstrap,
        })
    }
}

/// Step-down min-p accumulator.
///
/// `σ` orders the raw p-values ascending, ties by index. For each replicate
/// the successive minima `q*_s = min{π*_{σ(s')} : s' >= s}` are formed and
/// level `m` counts `1{q*_{σ^{-1}(m)} <= π(z_m)}`.
#[derive(Debug, Clone)]
pub struct StepDown {
    raw: Vec<f64>,
    order: Vec<usize>,
    counts: Vec<u64>,
    replicates: u64,
    qstar: Vec<f64>,
}

impl StepDown {
    pub fn new(raw: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.sort_by(|&a, &b| raw[a].total_cmp(&raw[b]));
        StepDown {
            raw: raw.to_vec(),
            order,
            counts: vec![0; raw.len()],
            replicates: 0,
            qstar: vec![0.0; raw.len()],
        }
    }

    pub fn add(&mut self, pstar: &[f64]) {
        let m = self.raw.len();
        assert_eq!(pstar.len(), m, "replicate has wrong length");
        let mut running = f64::INFINITY;
        for s in (0..m).rev() {
            running = running.min(pstar[self.order[s]]);
            self.qstar[s] = running;
        }
        for (s, &level) in self.order.iter().enumerate() {
            if self.qstar[s] <= self.raw[level] {
                self.counts[level] += 1;
            }
        }
        self.replicates += 1;
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn adjusted(&self) -> Vec<f64> {
        let l = self.replicates.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / l).collect()
    }
}

/// Westfall–Young adjustment of `raw` using `replicates` resampled p-value
/// vectors produced by `replicate(l)`.
pub fn westfall_young_adjust<F>(raw: &[f64], replicates: usize, replicate: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync,
{
    if replicates == 0 {
        return Err(Error::InvalidParameter("bootstrap count must be at least 1".into()));
    }
    let draws: Vec<Vec<f64>> = (0..replicates).into_par_iter().map(&replicate).collect::<Result<_>>()?;
    let mut counter = StepDown::new(raw);
    for d in &draws {
        if d.len() != raw.len() {
            return Err(Error::DimensionMismatch(format!(
                "replicate has {} p-values, expected {}",
                d.len(),
                raw.len()
            )));
        }
        counter.add(d);
    }
    Ok(counter.adjusted())
}

/// Pointwise test at a single level.
pub fn cep_pointwise(ds: &PredictionDataset, i: usize, j_set: &[usize], z: f64) -> Result<CepPoint> {
    let problem = CepProblem::new(ds, i, j_set, &[z])?;
    Ok(problem.pointwise()?.remove(0))
}

/// CEP test of forecaster `i` with respect to the forecasters in `j_set`.
pub fn cep_test(ds: &PredictionDataset, i: usize, j_set: &[usize], config: &CepConfig) -> Result<CepReport> {
    config.validate()?;
    CepProblem::new(ds, i, j_set, &config.grid)?.run(config)
}

/// Global CEP decision with early stopping.
pub fn cep_decision(
    ds: &PredictionDataset,
    i: usize,
    j_set: &[usize],
    config: &CepConfig,
) -> Result<CepDecision> {
    config.validate()?;
    CepProblem::new(ds, i, j_set, &config.grid)?.decide(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Forecaster;
    use crate::dist::Family;

    fn normal_dataset(n: usize, seed: u64) -> PredictionDataset {
        let mut r = rng::stream(seed, 1);
        let mut y = Vec::new();
        let mut rows = Vec::new();
        for _ in 0..n {
            let mu: f64 = r.random::<f64>() * 2.0 - 1.0;
            let e: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut r);
            y.push(mu + e);
            rows.push(vec![mu, 1.0]);
        }
        let f = Forecaster::from_params("F1", Family::Normal, &rows).unwrap();
        PredictionDataset::with_seeded_randomizers(vec![f], y, seed).unwrap()
    }

    #[test]
    fn grids_have_published_endpoints() {
        let g = simulation_grid();
        assert_eq!(g.len(), 20);
        assert!((g[0] - 0.05).abs() < 1e-15 && (g[19] - 0.95).abs() < 1e-15);
        let d = data_grid();
        assert_eq!(d.len(), 150);
        assert!((d[0] - 1.0 / 150.0).abs() < 1e-15 && (d[149] - 149.0 / 150.0).abs() < 1e-15);
    }

    #[test]
    fn balanced_intercept_only_level_has_zero_statistic() {
        // PITs exactly half below 0.5
        let rows = vec![vec![0.0, 1.0]; 8];
        let y = vec![-1.0, -0.5, -0.2, -0.1, 0.1, 0.2, 0.5, 1.0];
        let f = Forecaster::from_params("F1", Family::Normal, &rows).unwrap();
        let ds = PredictionDataset::new(vec![f], y, vec![0.5; 8]).unwrap();
        let p = cep_pointwise(&ds, 0, &[], 0.5).unwrap();
        assert!(p.beta[0].abs() < 1e-12);
        assert!(p.statistic < 1e-12);
        assert!((p.p_raw - 1.0).abs() < 1e-6);
    }

    #[test]
    fn all_zero_indicators_give_finite_statistic() {
        let rows = vec![vec![0.0, 1.0]; 10];
        let y = vec![5.0; 10];
        let f = Forecaster::from_params("F1", Family::Normal, &rows).unwrap();
        let means: Vec<Vec<f64>> = (0..10).map(|t| vec![t as f64 * 0.1, 1.0]).collect();
        let g = Forecaster::from_params("F2", Family::Normal, &means).unwrap();
        let ds = PredictionDataset::new(vec![f, g], y, vec![0.5; 10]).unwrap();
        let p = cep_pointwise(&ds, 0, &[1], 0.05).unwrap();
        assert!(p.statistic.is_finite() && p.statistic >= 0.0);
        assert!(p.beta.iter().all(|b| b.is_finite()));
    }

    #[test]
    fn self_conditioning_drops_nothing_and_duplicate_is_dropped() {
        let ds = normal_dataset(40, 3);
        let p = cep_pointwise(&ds, 0, &[0, 0], 0.3).unwrap();
        assert_eq!(p.df, 2);
        assert_eq!(p.dropped.len(), 1);
    }

    #[test]
    fn single_level_adjustment_is_plain_bootstrap_pvalue() {
        let ds = normal_dataset(30, 4);
        let config = CepConfig {
            grid: vec![0.3],
            bootstrap: 100,
            alpha: 0.05,
            seed: 11,
        };
        let problem = CepProblem::new(&ds, 0, &[0], &config.grid).unwrap();
        let report = problem.run(&config).unwrap();
        let raw = report.points[0].p_raw;
        let hits = (0..100)
            .filter(|&l| problem.bootstrap_pvalues(11, l).unwrap()[0] <= raw)
            .count();
        assert_eq!(report.points[0].p_adjusted, Some(hits as f64 / 100.0));
    }

    #[test]
    fn all_raw_ones_give_unit_adjusted() {
        let r = westfall_young_adjust(&[1.0, 1.0, 1.0], 10, |l| Ok(vec![0.1 * (l % 3) as f64, 0.5, 1.0])).unwrap();
        assert_eq!(r, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn step_down_uses_successive_minima() {
        // raw order: level 1 (0.01), level 2 (0.2), level 0 (0.5)
        let mut sd = StepDown::new(&[0.5, 0.01, 0.2]);
        sd.add(&[0.4, 0.3, 0.6]);
        // q* = [min(0.3,0.6,0.4), min(0.6,0.4), 0.4] = [0.3, 0.4, 0.4]
        assert_eq!(sd.counts(), &[1, 0, 0]);
    }

    #[test]
    fn ties_keep_index_order() {
        let sd = StepDown::new(&[0.2, 0.1, 0.2, 0.1]);
        assert_eq!(sd.order, vec![1, 3, 0, 2]);
    }

    #[test]
    fn monotone_transform_leaves_adjustment_unchanged() {
        let ds = normal_dataset(40, 5);
        let grid = simulation_grid();
        let problem = CepProblem::new(&ds, 0, &[0], &grid).unwrap();
        let raw = problem.raw_pvalues().unwrap();
        let plain = westfall_young_adjust(&raw, 50, |l| problem.bootstrap_pvalues(9, l)).unwrap();
        let squared_raw: Vec<f64> = raw.iter().map(|p| p * p).collect();
        let squared = westfall_young_adjust(&squared_raw, 50, |l| {
            Ok(problem.bootstrap_pvalues(9, l)?.iter().map(|p| p * p).collect())
        })
        .unwrap();
        assert_eq!(plain, squared);
    }

    #[test]
    fn report_is_deterministic_and_matches_generic_adjustment() {
        let ds = normal_dataset(35, 6);
        let config = CepConfig {
            grid: simulation_grid(),
            bootstrap: 40,
            alpha: 0.05,
            seed: 21,
        };
        let a = cep_test(&ds, 0, &[0], &config).unwrap();
        let b = cep_test(&ds, 0, &[0], &config).unwrap();
        assert_eq!(a, b);
        let problem = CepProblem::new(&ds, 0, &[0], &config.grid).unwrap();
        let raw = problem.raw_pvalues().unwrap();
        let generic = westfall_young_adjust(&raw, 40, |l| problem.bootstrap_pvalues(21, l)).unwrap();
        let from_report: Vec<f64> = a.points.iter().map(|p| p.p_adjusted.unwrap()).collect();
        assert_eq!(generic, from_report);
    }

    #[test]
    fn early_exit_decision_agrees_with_full_report() {
        for seed in 0..6 {
            let ds = normal_dataset(30, 100 + seed);
            for j in [vec![], vec![0]] {
                let config = CepConfig {
                    grid: simulation_grid(),
                    bootstrap: 60,
                    alpha: 0.05,
                    seed,
                };
                let full = cep_test(&ds, 0, &j, &config).unwrap();
                let fast = cep_decision(&ds, 0, &j, &config).unwrap();
                assert_eq!(full.reject, fast.reject);
            }
        }
    }

    #[test]
    fn config_validation() {
        let mut c = CepConfig::simulation(1);
        c.grid = vec![0.2, 0.2];
        assert!(c.validate().is_err());
        c.grid = vec![0.0, 0.5];
        assert!(c.validate().is_err());
        let mut c = CepConfig::data(1);
        c.bootstrap = 0;
        assert!(c.validate().is_err());
    }
}
