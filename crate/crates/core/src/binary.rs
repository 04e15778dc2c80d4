//! Interval forecasts of binary outcomes.
//!
//! Two forecasters each name one of `n` equal subintervals of `[0, 1]` per
//! time step. A forecasting profile `ℓ = (ℓ₁, ℓ₂)` is the pair of named
//! intervals; forecaster `j` passes when, for every profile that occurred,
//! the observed success frequency lies in its interval `[(ℓ_j - 1)/n, ℓ_j/n]`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::PredictionDataset;
use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::rng;
use crate::scenarios::BinaryBetaLaws;

/// Smallest admissible resolution.
pub const MIN_RESOLUTION: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalForecastSeries {
    resolution: usize,
    /// 1-based interval indices per time step.
    intervals: Vec<[u16; 2]>,
    outcomes: Vec<bool>,
}

/// 1-based index of the interval holding `p`; shared endpoints go to the lower interval.
pub fn interval_index(p: f64, resolution: usize) -> usize {
    ((p * resolution as f64).ceil() as usize).clamp(1, resolution)
}

impl IntervalForecastSeries {
    pub fn new(resolution: usize, intervals: Vec<[usize; 2]>, outcomes: Vec<bool>) -> Result<Self> {
        if resolution < MIN_RESOLUTION || resolution > u16::MAX as usize {
            return Err(Error::InvalidParameter(format!(
                "resolution must be in {MIN_RESOLUTION}..={}, got {resolution}",
                u16::MAX
            )));
        }
        if intervals.len() != outcomes.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} interval pairs for {} outcomes",
                intervals.len(),
                outcomes.len()
            )));
        }
        if intervals.is_empty() {
            return Err(Error::TooShort { needed: 1, got: 0 });
        }
        let intervals = intervals
            .into_iter()
            .map(|[a, b]| {
                for l in [a, b] {
                    if l == 0 || l > resolution {
                        return Err(Error::IndexOutOfRange { index: l, count: resolution });
                    }
                }
                Ok([a as u16, b as u16])
            })
            .collect::<Result<_>>()?;
        Ok(IntervalForecastSeries { resolution, intervals, outcomes })
    }

    /// Bins point probabilities into intervals.
    pub fn from_probabilities(resolution: usize, p1: &[f64], p2: &[f64], outcomes: Vec<bool>) -> Result<Self> {
        if p1.len() != p2.len() {
            return Err(Error::DimensionMismatch("forecasters differ in length".into()));
        }
        if let Some(&bad) = p1.iter().chain(p2).find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidProbability(bad));
        }
        let intervals = p1
            .iter()
            .zip(p2)
            .map(|(&a, &b)| [interval_index(a, resolution), interval_index(b, resolution)])
            .collect();
        Self::new(resolution, intervals, outcomes)
    }

    /// Uses two Bernoulli forecasters of a dataset with 0/1 outcomes.
    pub fn from_dataset(ds: &PredictionDataset, first: usize, second: usize, resolution: usize) -> Result<Self> {
        let probs = |i: usize| -> Result<Vec<f64>> {
            let f = ds.forecaster(i)?;
            f.forecasts()
                .iter()
                .map(|d| match *d {
                    Distribution::Bernoulli { p } => Ok(p),
                    _ => Err(Error::InvalidParameter(format!(
                        "forecaster {} is not Bernoulli",
                        f.label()
                    ))),
                })
                .collect()
        };
        let outcomes = ds
            .y()
            .iter()
            .map(|&y| match y {
                0.0 => Ok(false),
                1.0 => Ok(true),
                _ => Err(Error::InvalidParameter(format!("binary outcome expected, got {y}"))),
            })
            .collect::<Result<_>>()?;
        Self::from_probabilities(resolution, &probs(first)?, &probs(second)?, outcomes)
    }

    /// Draws the binary-beta scenario directly as an interval series.
    ///
    /// Consumes the random stream exactly like the dataset generator, so
    /// `from_dataset(simulate(..))` yields the same series.
    pub fn simulate_binary_beta(len: usize, resolution: usize, seed: u64) -> Result<Self> {
        let laws = BinaryBetaLaws::new();
        let mut r = rng::stream(seed, 0);
        let mut intervals = Vec::with_capacity(len);
        let mut outcomes = Vec::with_capacity(len);
        for _ in 0..len {
            let (p1, p2, omega) = laws.draw(&mut r);
            intervals.push([interval_index(p1, resolution), interval_index(p2, resolution)]);
            outcomes.push(omega);
        }
        Self::new(resolution, intervals, outcomes)
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn outcomes(&self) -> &[bool] {
        &self.outcomes
    }

    pub fn interval(&self, t: usize) -> [usize; 2] {
        let [a, b] = self.intervals[t];
        [a as usize, b as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileStat {
    pub count: u64,
    pub successes: u64,
}

impl ProfileStat {
    pub fn frequency(&self) -> f64 {
        self.successes as f64 / self.count as f64
    }
}

/// Counts and successes per realized profile; unseen profiles are absent.
pub fn fs_profile_stats(s: &IntervalForecastSeries) -> BTreeMap<(usize, usize), ProfileStat> {
    let mut map = BTreeMap::new();
    for (&[a, b], &w) in s.intervals.iter().zip(&s.outcomes) {
        let e = map
            .entry((a as usize, b as usize))
            .or_insert(ProfileStat { count: 0, successes: 0 });
        e.count += 1;
        e.successes += w as u64;
    }
    map
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailingProfile {
    pub profile: (usize, usize),
    pub count: u64,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsVerdict {
    pub forecaster: usize,
    pub pass: bool,
    pub failing: Vec<FailingProfile>,
}

/// Checks forecaster `j` (1 or 2) against every realized profile.
pub fn fs_pass(s: &IntervalForecastSeries, j: usize) -> Result<FsVerdict> {
    fs_pass_stats(&fs_profile_stats(s), s.resolution, j)
}

/// Same as [`fs_pass`] from precomputed profile statistics.
pub fn fs_pass_stats(
    stats: &BTreeMap<(usize, usize), ProfileStat>,
    resolution: usize,
    j: usize,
) -> Result<FsVerdict> {
    if j != 1 && j != 2 {
        return Err(Error::IndexOutOfRange { index: j, count: 2 });
    }
    let n = resolution as u64;
    let failing: Vec<FailingProfile> = stats
        .iter()
        .filter(|(&(a, b), st)| {
            let l = if j == 1 { a } else { b } as u64;
            // (l-1)/n <= s/c <= l/n, in integers
            let s_n = st.successes * n;
            s_n < (l - 1) * st.count || s_n > l * st.count
        })
        .map(|(&profile, st)| FailingProfile {
            profile,
            count: st.count,
            frequency: st.frequency(),
        })
        .collect();
    Ok(FsVerdict { forecaster: j, pass: failing.is_empty(), failing })
}

/// Density at `z` of the randomized PIT of a Bernoulli forecast with success
/// probability `x1` when the true success probability is `q`.
pub fn binary_pit_density(z: f64, x1: f64, q: f64) -> Result<f64> {
    if !(x1 > 0.0 && x1 < 1.0) {
        return Err(Error::InvalidProbability(x1));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidProbability(q));
    }
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::InvalidProbability(z));
    }
    Ok(if z >= 1.0 - x1 { q / x1 } else { (1.0 - q) / (1.0 - x1) })
}

/// Pass rate of forecaster `j` over `replications` binary-beta series.
pub fn fs_pass_rate(len: usize, resolution: usize, j: usize, replications: usize, seed: u64) -> Result<f64> {
    use rayon::prelude::*;
    let passes = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let s = IntervalForecastSeries::simulate_binary_beta(len, resolution, rng::derive_seed(seed, &[rep as u64]))?;
            Ok(fs_pass(&s, j)?.pass as usize)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(passes.iter().sum::<usize>() as f64 / replications as f64)
}

/// Draws `(p, outcome, randomizer)` used by the PIT-density checks.
pub fn simulate_bernoulli_pits<R: Rng + ?Sized>(
    r: &mut R,
    len: usize,
    truth: impl Fn(f64) -> f64,
) -> Vec<(f64, f64)> {
    (0..len)
        .map(|_| {
            let x1: f64 = r.random::<f64>().clamp(1e-9, 1.0 - 1e-9);
            let omega = r.random::<f64>() < truth(x1);
            let v: f64 = r.random();
            let z = if omega { 1.0 - x1 + v * x1 } else { v * (1.0 - x1) };
            (x1, z)
        })
        .collect()
}
