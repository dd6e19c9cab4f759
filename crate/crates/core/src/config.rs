use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which corrections the estimator applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Inverse-probability weights and the orthogonal residual.
    FullCorrection,
    /// Orthogonal residual only; complete rows get unit weight.
    ErrorOnly,
    /// Inverse-probability weights only; plain residual.
    MissingOnly,
    /// Neither correction.
    NoCorrection,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::FullCorrection,
        Condition::ErrorOnly,
        Condition::MissingOnly,
        Condition::NoCorrection,
    ];

    pub fn uses_ipw(self) -> bool {
        matches!(self, Condition::FullCorrection | Condition::MissingOnly)
    }

    pub fn uses_orthogonal(self) -> bool {
        matches!(self, Condition::FullCorrection | Condition::ErrorOnly)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::FullCorrection => "full_correction",
            Condition::ErrorOnly => "error_only",
            Condition::MissingOnly => "missing_only",
            Condition::NoCorrection => "no_correction",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Condition::FullCorrection => "Measurement error and missing data corrected",
            Condition::ErrorOnly => "Measurement error corrected only",
            Condition::MissingOnly => "Missing data corrected only",
            Condition::NoCorrection => "No correction",
        }
    }
}

impl std::str::FromStr for Condition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "full_correction" | "full" | "1" => Ok(Condition::FullCorrection),
            "error_only" | "error" | "2" => Ok(Condition::ErrorOnly),
            "missing_only" | "missing" | "3" => Ok(Condition::MissingOnly),
            "no_correction" | "none" | "4" => Ok(Condition::NoCorrection),
            other => Err(Error::Config(format!("unknown condition '{other}'"))),
        }
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSettings {
    /// Initial step before backtracking; also scales the zeroing threshold.
    pub step_size: f64,
    pub max_iters: usize,
    /// Stop once the active-set gradient norm of the per-row objective
    /// drops to this level.
    pub grad_tol: f64,
    pub max_halvings: u32,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            step_size: 0.5,
            max_iters: 2000,
            grad_tol: 1e-6,
            max_halvings: 30,
        }
    }
}

/// Starting point used by [`crate::fit_penalized`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitStrategy {
    /// Start at `w = 0`.
    Zero,
    /// Start at `w = 0` with `h = start`, then refit at `start / factor`,
    /// `start / factor^2`, ... warm-starting each stage from the previous
    /// one, finishing at the target `h`. Stages at or below the target are
    /// skipped.
    Continuation { start: f64, factor: f64 },
}

impl Default for InitStrategy {
    fn default() -> Self {
        InitStrategy::Continuation {
            start: 10.0,
            factor: 10.0,
        }
    }
}

impl InitStrategy {
    /// The sequence of `h` values fitted on the way to `h`; always ends
    /// with `h` itself.
    pub fn stages(&self, h: f64) -> Vec<f64> {
        let mut out = Vec::new();
        if let InitStrategy::Continuation { start, factor } = *self {
            let mut s = start;
            while s > h * (1.0 + 1e-9) {
                out.push(s);
                s /= factor;
            }
        }
        out.push(h);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Loss tuning parameter.
    pub h: f64,
    pub condition: Condition,
    pub optimizer: OptimizerSettings,
    /// Candidate penalty levels searched by HBIC.
    pub hbic_grid: Vec<f64>,
    pub atan_u: f64,
    /// Multiplier in `E_n = en_rule * log(d)`.
    pub en_rule: f64,
    pub init: InitStrategy,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            h: 1.0,
            condition: Condition::FullCorrection,
            optimizer: OptimizerSettings::default(),
            hbic_grid: log_grid(1e-3, 1e1, 30),
            atan_u: 0.005,
            en_rule: 1.0,
            init: InitStrategy::default(),
        }
    }
}

impl FitConfig {
    pub fn with_h(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    pub fn with_condition(mut self, condition: Condition) -> Self {
        self.condition = condition;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::Config(format!("h must be positive, got {}", self.h)));
        }
        if self.hbic_grid.is_empty() {
            return Err(Error::Config("hbic_grid is empty".into()));
        }
        if let Some(f) = self.hbic_grid.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
            return Err(Error::Config(format!("hbic_grid value {f} is not positive")));
        }
        let o = &self.optimizer;
        if !(o.step_size > 0.0 && o.step_size.is_finite()) {
            return Err(Error::Config("step_size must be positive".into()));
        }
        if o.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        if !(o.grad_tol > 0.0) {
            return Err(Error::Config("grad_tol must be positive".into()));
        }
        if !(self.atan_u > 0.0) {
            return Err(Error::Config("atan_u must be positive".into()));
        }
        if !(self.en_rule > 0.0) {
            return Err(Error::Config("en_rule must be positive".into()));
        }
        if let InitStrategy::Continuation { start, factor } = self.init {
            if !(start > 0.0 && start.is_finite() && factor > 1.0 && factor.is_finite()) {
                return Err(Error::Config(format!(
                    "continuation needs start > 0 and factor > 1, got {start} and {factor}"
                )));
            }
        }
        Ok(())
    }
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}
