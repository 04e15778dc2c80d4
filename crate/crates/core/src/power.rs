//! Monte Carlo rejection rates of the tests on simulated scenarios.
//!
//! Replicate `r` simulates its dataset from `derive_seed(seed, [r])` and
//! seeds any resampling from `derive_seed(seed, [r, 1])`, so results do not
//! depend on thread scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binary::{fs_pass, IntervalForecastSeries};
use crate::cep::{CepConfig, CepProblem};
use crate::error::{Error, Result};
use crate::lra::lra_test;
use crate::mct::mct_test;
use crate::rng::derive_seed;
use crate::scenarios::{simulate, ScenarioName, ScenarioSpec};
use crate::sra::{sra_test, Score};

/// Which LRA p-value decides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LraStatistic {
    /// Holm combination of the F-test and the normality test.
    Adjusted,
    FTest,
    Normality,
}

/// Test applied to each replicate. Forecaster indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "snake_case")]
pub enum TestSpec {
    Cep {
        tested: usize,
        conditioning: Vec<usize>,
        grid: Vec<f64>,
        bootstrap: usize,
    },
    Lra {
        tested: usize,
        conditioning: Vec<usize>,
        statistic: LraStatistic,
    },
    Sra {
        tested: usize,
        others: Vec<usize>,
        score: Score,
    },
    Mct {
        tested: usize,
        reference: usize,
        grid: Vec<f64>,
    },
    /// Counts passes of the interval test instead of rejections.
    Fs { forecaster: usize, resolution: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerStudySpec {
    pub scenario: ScenarioName,
    pub n: usize,
    pub test: TestSpec,
    pub replications: usize,
    pub alpha: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerResult {
    /// Share of completed replicates that rejected (passed, for `Fs`).
    pub power: f64,
    /// Binomial standard error of `power`.
    pub std_error: f64,
    pub rejections: usize,
    pub completed: usize,
    pub errors: usize,
    /// Up to five distinct error messages.
    pub error_messages: Vec<String>,
}

impl PowerStudySpec {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidParameter("at least one replication is required".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidProbability(self.alpha));
        }
        if self.n == 0 {
            return Err(Error::TooShort { needed: 1, got: 0 });
        }
        if let TestSpec::Fs { forecaster, .. } = self.test {
            if self.scenario != ScenarioName::BinaryBeta {
                return Err(Error::InvalidParameter("the interval test needs the binary-beta scenario".into()));
            }
            if forecaster != 1 && forecaster != 2 {
                return Err(Error::IndexOutOfRange { index: forecaster, count: 2 });
            }
        }
        Ok(())
    }
}

/// Outcome of one replicate.
pub fn run_replicate(spec: &PowerStudySpec, r: usize) -> Result<bool> {
    let data_seed = derive_seed(spec.seed, &[r as u64]);
    let test_seed = derive_seed(spec.seed, &[r as u64, 1]);
    if let TestSpec::Fs { forecaster, resolution } = spec.test {
        let s = IntervalForecastSeries::simulate_binary_beta(spec.n, resolution, data_seed)?;
        return Ok(fs_pass(&s, forecaster)?.pass);
    }
    let ds = simulate(&ScenarioSpec { name: spec.scenario, n: spec.n, seed: data_seed })?;
    match &spec.test {
        TestSpec::Cep { tested, conditioning, grid, bootstrap } => {
            let config = CepConfig {
                grid: grid.clone(),
                bootstrap: *bootstrap,
                alpha: spec.alpha,
                seed: test_seed,
            };
            Ok(CepProblem::new(&ds, *tested, conditioning, grid)?.decide(&config)?.reject)
        }
        TestSpec::Lra { tested, conditioning, statistic } => {
            let rep = lra_test(&ds, *tested, conditioning)?;
            let p = match statistic {
                LraStatistic::Adjusted => rep.p_adjust,
                LraStatistic::FTest => rep.p_f,
                LraStatistic::Normality => rep.p_normal,
            };
            Ok(p <= spec.alpha)
        }
        TestSpec::Sra { tested, others, score } => Ok(sra_test(&ds, *tested, others, *score)?.reject(spec.alpha)),
        TestSpec::Mct { tested, reference, grid } => Ok(mct_test(&ds, *tested, *reference, grid)?.reject(spec.alpha)),
        TestSpec::Fs { .. } => unreachable!(),
    }
}

pub fn power_study(spec: &PowerStudySpec) -> Result<PowerResult> {
    spec.validate()?;
    let outcomes: Vec<Result<bool>> = (0..spec.replications)
        .into_par_iter()
        .map(|r| run_replicate(spec, r))
        .collect();
    let mut rejections = 0;
    let mut completed = 0;
    let mut errors = 0;
    let mut error_messages: Vec<String> = Vec::new();
    for o in outcomes {
        match o {
            Ok(rej) => {
                completed += 1;
                rejections += rej as usize;
            }
            Err(e) => {
                errors += 1;
                let msg = e.to_string();
                if error_messages.len() < 5 && !error_messages.contains(&msg) {
                    error_messages.push(msg);
                }
            }
        }
    }
    let (power, std_error) = if completed > 0 {
        let p = rejections as f64 / completed as f64;
        (p, (p * (1.0 - p) / completed as f64).sqrt())
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(PowerResult { power, std_error, rejections, completed, errors, error_messages })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cep::simulation_grid;

    fn lra_spec(r: usize) -> PowerStudySpec {
        PowerStudySpec {
            scenario: ScenarioName::Gr2013,
            n: 20,
            test: TestSpec::Lra { tested: 3, conditioning: vec![1], statistic: LraStatistic::Adjusted },
            replications: r,
            alpha: 0.05,
            seed: 42,
        }
    }

    #[test]
    fn single_replicate_is_zero_or_one() {
        let r = power_study(&lra_spec(1)).unwrap();
        assert!(r.power == 0.0 || r.power == 1.0);
        assert_eq!(r.completed + r.errors, 1);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = power_study(&lra_spec(50)).unwrap();
        let b = power_study(&lra_spec(50)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn errors_are_counted() {
        let spec = PowerStudySpec {
            scenario: ScenarioName::Gr2013,
            n: 30,
            test: TestSpec::Sra { tested: 1, others: vec![], score: Score::Dss },
            replications: 4,
            alpha: 0.05,
            seed: 1,
        };
        let r = power_study(&spec).unwrap();
        assert_eq!(r.errors, 4);
        assert_eq!(r.completed, 0);
        assert_eq!(r.error_messages.len(), 1);
        assert!(r.power.is_nan());
    }

    #[test]
    fn spec_validation() {
        let mut s = lra_spec(0);
        assert!(power_study(&s).is_err());
        s.replications = 1;
        s.alpha = 1.0;
        assert!(power_study(&s).is_err());
        s.alpha = 0.05;
        s.test = TestSpec::Fs { forecaster: 1, resolution: 5 };
        assert!(power_study(&s).is_err());
    }

    #[test]
    fn cep_replicate_runs() {
        let spec = PowerStudySpec {
            scenario: ScenarioName::Gr2013,
            n: 50,
            test: TestSpec::Cep { tested: 3, conditioning: vec![0], grid: simulation_grid(), bootstrap: 20 },
            replications: 3,
            alpha: 0.05,
            seed: 5,
        };
        let r = power_study(&spec).unwrap();
        assert_eq!(r.completed, 3);
        assert_eq!(r.rejections, 3);
    }

    #[test]
    fn spec_round_trips_through_json() {
        let s = lra_spec(10);
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains("\"test\":\"lra\""));
        assert_eq!(serde_json::from_str::<PowerStudySpec>(&j).unwrap(), s);
    }
}
