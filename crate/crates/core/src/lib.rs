//! Robust penalized linear regression for data with covariates that are
//! missing at random and observed with additive measurement error.
//!
//! The estimator minimizes an inverse-probability-weighted exponential
//! squared loss on orthogonal residuals plus a sparsity penalty (Lasso,
//! SCAD, MCP or Atan), choosing the penalty level by a high-dimensional BIC.

pub mod config;
pub mod dataset;
pub mod error;
pub mod estimator;
pub mod io;
pub mod loss;
pub mod penalty;
pub mod pipeline;
pub mod propensity;
pub mod screening;
pub mod simulation;
pub mod synth;

pub use config::{Condition, FitConfig, InitStrategy, OptimizerSettings};
pub use dataset::{Coefficients, Dataset};
pub use error::{Error, Result};
pub use estimator::{fit_penalized, hbic, select_f, EstimateResult};
pub use penalty::{PenaltyFamily, PenaltySpec};
pub use propensity::PropensityWeights;
