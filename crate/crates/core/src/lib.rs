//! Cross-calibration diagnostics and tests for probabilistic forecasts.

pub mod binary;
pub mod cep;
pub mod dataset;
pub mod diagnostics;
pub mod dist;
pub mod error;
pub mod firth;
pub mod gof;
pub mod lra;
pub mod mct;
pub mod power;
pub mod quadrature;
pub mod regression;
pub mod rng;
pub mod scenarios;
pub mod special;
pub mod sra;

pub use dataset::{pit, Forecaster, PitSeries, PredictionDataset};
pub use dist::{Distribution, Family};
pub use error::{Error, Result};
