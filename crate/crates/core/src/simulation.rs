//! Monte Carlo study of the estimator on synthetic data.
//!
//! Each replication draws a clean design and response, adds Gaussian
//! measurement error to every covariate, deletes covariates 1, 3 and 5 (one
//! based) for rows selected by a logistic missingness model, fits the
//! penalized estimator under the requested correction condition and records
//! the model error `|w_hat - w|^2`.

use std::fmt::Write as _;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Condition, FitConfig};
use crate::dataset::{Coefficients, Dataset};
use crate::error::{Error, Result};
use crate::estimator::select_f;
use crate::penalty::{PenaltyFamily, PenaltySpec};
use crate::propensity::{estimate_propensity_default, PropensityWeights, DEFAULT_CLIP_FLOOR};

/// Zero-based positions and values of the nonzero true coefficients.
pub const TRUE_SUPPORT: [(usize, f64); 3] = [(1, 1.0), (3, 2.0), (5, 4.0)];

/// Zero-based columns that may be missing.
pub const MISSING_COLUMNS: [usize; 3] = [0, 2, 4];

/// Lag-one correlation of the correlated design.
pub const AR_RHO: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correlation {
    /// Independent covariates.
    Ind,
    /// `corr(X_j, X_k) = 0.5^{|j-k|}`.
    Corr,
}

impl Correlation {
    pub fn as_str(self) -> &'static str {
        match self {
            Correlation::Ind => "ind",
            Correlation::Corr => "corr",
        }
    }
}

impl std::str::FromStr for Correlation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ind" | "independent" => Ok(Correlation::Ind),
            "corr" | "ar1" => Ok(Correlation::Corr),
            other => Err(Error::Config(format!("unknown correlation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorDist {
    #[serde(rename = "normal", alias = "normal01")]
    Normal01,
    #[serde(rename = "t3")]
    T3,
    #[serde(rename = "chisq2")]
    ChiSq2,
}

impl ErrorDist {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorDist::Normal01 => "normal",
            ErrorDist::T3 => "t3",
            ErrorDist::ChiSq2 => "chisq2",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ErrorDist::Normal01 => "N(0,1)",
            ErrorDist::T3 => "t(3)",
            ErrorDist::ChiSq2 => "chisq(2)",
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            ErrorDist::Normal01 => rng.sample(StandardNormal),
            ErrorDist::T3 => StudentT::new(3.0).expect("valid dof").sample(rng),
            // uncentred on purpose: the skew is part of the experiment
            ErrorDist::ChiSq2 => ChiSquared::new(2.0).expect("valid dof").sample(rng),
        }
    }
}

impl std::str::FromStr for ErrorDist {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['(', ')', ',', '_'], "").as_str() {
            "normal" | "normal01" | "n01" | "gaussian" => Ok(ErrorDist::Normal01),
            "t3" | "t" => Ok(ErrorDist::T3),
            "chisq2" | "chisq" | "chi2" => Ok(ErrorDist::ChiSq2),
            other => Err(Error::Config(format!("unknown error distribution '{other}'"))),
        }
    }
}

/// Logistic completeness model
/// `P(F_i = 1) = logistic(intercept + coef_y * y_i + coef_a * t_{i,a} + coef_b * t_{i,b})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissingnessModel {
    pub enabled: bool,
    pub intercept: f64,
    pub coef_y: f64,
    /// Zero-based column and coefficient pairs entering the linear predictor.
    pub covariate_terms: Vec<(usize, f64)>,
    /// Zero-based columns deleted in incomplete rows.
    pub columns: Vec<usize>,
}

impl Default for MissingnessModel {
    fn default() -> Self {
        Self {
            enabled: true,
            intercept: 1.0,
            coef_y: 2.0,
            covariate_terms: vec![(2, -2.0), (4, 4.0)],
            columns: MISSING_COLUMNS.to_vec(),
        }
    }
}

impl MissingnessModel {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn linear_predictor(&self, y: f64, row: ndarray::ArrayView1<'_, f64>) -> f64 {
        self.intercept
            + self.coef_y * y
            + self
                .covariate_terms
                .iter()
                .map(|&(k, c)| c * row[k])
                .sum::<f64>()
    }
}

pub fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationScenario {
    pub n: usize,
    pub d: usize,
    pub correlation: Correlation,
    pub error_dist: ErrorDist,
    pub condition: Condition,
    pub penalty_family: PenaltyFamily,
    pub h: f64,
    /// Variance of the additive measurement error.
    pub me_variance: f64,
    /// Multiplier on the model error term; 0 gives a noiseless response.
    pub noise_scale: f64,
    pub missingness: MissingnessModel,
    pub clip_floor: f64,
    pub replications: usize,
    pub seed: u64,
    pub fit: FitConfig,
}

impl SimulationScenario {
    /// The design of the n = 100, d = 300 study with defaults for
    /// everything else.
    pub fn new(correlation: Correlation, error_dist: ErrorDist, condition: Condition, penalty: PenaltyFamily, h: f64) -> Self {
        Self {
            n: 100,
            d: 300,
            correlation,
            error_dist,
            condition,
            penalty_family: penalty,
            h,
            me_variance: 0.3,
            noise_scale: 1.0,
            missingness: MissingnessModel::default(),
            clip_floor: DEFAULT_CLIP_FLOOR,
            replications: 300,
            seed: 20_240_101,
            fit: FitConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("n must be at least 2, got {}", self.n)));
        }
        if self.d < 7 {
            return Err(Error::Config(format!("d must be at least 7, got {}", self.d)));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if !(self.me_variance >= 0.0) {
            return Err(Error::Config("me_variance must be >= 0".into()));
        }
        if !(self.noise_scale >= 0.0) {
            return Err(Error::Config("noise_scale must be >= 0".into()));
        }
        if let Some(&k) = self
            .missingness
            .columns
            .iter()
            .chain(self.missingness.covariate_terms.iter().map(|(k, _)| k))
            .find(|&&k| k >= self.d)
        {
            return Err(Error::Config(format!("missingness column {k} >= d")));
        }
        self.fit.clone().with_h(self.h).validate()
    }

    fn fit_config(&self) -> FitConfig {
        self.fit.clone().with_h(self.h).with_condition(self.condition)
    }
}

/// True coefficients: 1, 2, 4 at one-based positions 2, 4, 6.
pub fn true_coefficients(d: usize) -> Coefficients {
    let mut w = vec![0.0; d];
    for (k, v) in TRUE_SUPPORT {
        if k < d {
            w[k] = v;
        }
    }
    Coefficients::new(w).expect("finite")
}

#[derive(Debug, Clone)]
pub struct CleanSample {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub omega_true: Coefficients,
    pub eps: Array1<f64>,
}

/// Draws rows of `N(0, Sigma)`. For the correlated design
/// `Sigma_{jk} = 0.5^{|j-k|}`, whose Cholesky factor reduces to the
/// recursion `x_j = rho x_{j-1} + sqrt(1 - rho^2) z_j`.
pub fn draw_design<R: Rng + ?Sized>(n: usize, d: usize, correlation: Correlation, rng: &mut R) -> Array2<f64> {
    let mut x = Array2::zeros((n, d));
    let innov = (1.0 - AR_RHO * AR_RHO).sqrt();
    for mut row in x.rows_mut() {
        let mut prev = 0.0;
        for (j, v) in row.iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            *v = match correlation {
                Correlation::Ind => z,
                Correlation::Corr if j == 0 => z,
                Correlation::Corr => AR_RHO * prev + innov * z,
            };
            prev = *v;
        }
    }
    x
}

pub fn generate_clean<R: Rng + ?Sized>(scenario: &SimulationScenario, rng: &mut R) -> CleanSample {
    let x = draw_design(scenario.n, scenario.d, scenario.correlation, rng);
    let omega_true = true_coefficients(scenario.d);
    let eps: Array1<f64> = (0..scenario.n)
        .map(|_| scenario.noise_scale * scenario.error_dist.sample(rng))
        .collect();
    let y = x.dot(&omega_true.view()) + &eps;
    CleanSample { x, y, omega_true, eps }
}

/// `T = X + G` with `G` i.i.d. `N(0, me_variance)` per cell.
pub fn apply_measurement_error<R: Rng + ?Sized>(x: &Array2<f64>, me_variance: f64, rng: &mut R) -> Array2<f64> {
    if me_variance == 0.0 {
        return x.clone();
    }
    let sd = me_variance.sqrt();
    let mut t = x.clone();
    for v in t.iter_mut() {
        let g: f64 = rng.sample(StandardNormal);
        *v += sd * g;
    }
    t
}

/// Draws completeness flags from the logistic model and marks the
/// configured columns of incomplete rows as absent (`NaN`).
pub fn apply_missingness<R: Rng + ?Sized>(
    t: &Array2<f64>,
    y: &Array1<f64>,
    model: &MissingnessModel,
    rng: &mut R,
) -> Result<Dataset> {
    let n = t.nrows();
    if !model.enabled {
        return Dataset::new(y.clone(), t.clone(), vec![true; n], &[]);
    }
    let mut design = t.clone();
    let mut complete = vec![true; n];
    for (i, flag) in complete.iter_mut().enumerate() {
        let p = logistic(model.linear_predictor(y[i], t.row(i)));
        let u: f64 = rng.random();
        *flag = u < p;
        if !*flag {
            for &k in &model.columns {
                design[[i, k]] = f64::NAN;
            }
        }
    }
    Dataset::new(y.clone(), design, complete, &model.columns)
}

/// `|omega_hat - omega|^2`.
pub fn model_error(omega_hat: &Coefficients, omega_true: &Coefficients) -> Result<f64> {
    if omega_hat.len() != omega_true.len() {
        return Err(Error::Dimension(format!(
            "{} estimated vs {} true coefficients",
            omega_hat.len(),
            omega_true.len()
        )));
    }
    Ok(omega_hat
        .as_slice()
        .iter()
        .zip(omega_true.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// Generator for replication `r`: stream `r` of a ChaCha generator keyed by
/// the scenario seed.
pub fn replication_rng(seed: u64, r: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64);
    rng
}

/// Simulated, corrupted dataset for one replication.
pub fn simulate_dataset(scenario: &SimulationScenario, r: usize) -> Result<(Dataset, CleanSample)> {
    let mut rng = replication_rng(scenario.seed, r);
    let clean = generate_clean(scenario, &mut rng);
    let t = apply_measurement_error(&clean.x, scenario.me_variance, &mut rng);
    let ds = apply_missingness(&t, &clean.y, &scenario.missingness, &mut rng)?;
    Ok((ds, clean))
}

/// Outcome of a single replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub error: f64,
    pub size: usize,
    pub true_positives: usize,
    pub f_selected: f64,
}

pub fn run_replication(scenario: &SimulationScenario, r: usize) -> Result<ReplicationOutcome> {
    let (ds, clean) = simulate_dataset(scenario, r)?;
    let cfg = scenario.fit_config();
    let weights = if scenario.condition.uses_ipw() {
        estimate_propensity_default(&ds, scenario.clip_floor)?
    } else {
        PropensityWeights::unit(ds.nrows())
    };
    let pen = PenaltySpec::new(scenario.penalty_family, 0.0).with_u(cfg.atan_u);
    let est = select_f(&ds, &weights, &pen, &cfg)?;
    let error = model_error(&est.omega_hat, &clean.omega_true)?;
    let true_positives = TRUE_SUPPORT
        .iter()
        .filter(|(k, _)| est.active_set.binary_search(k).is_ok())
        .count();
    Ok(ReplicationOutcome {
        error,
        size: est.active_set.len(),
        true_positives,
        f_selected: est.f_selected,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub error_dist: ErrorDist,
    pub correlation: Correlation,
    pub penalty: PenaltyFamily,
    pub h: f64,
    pub condition: Condition,
    pub n: usize,
    pub d: usize,
    pub mean_error: f64,
    /// Standard error of `mean_error`.
    pub se: f64,
    pub mean_size: f64,
    pub mean_tp: f64,
    pub replications: usize,
    pub failures: usize,
    /// False when more than 10% of replications failed.
    pub valid: bool,
    pub seed: u64,
    pub errors: Vec<f64>,
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let m = values.len();
    if m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    if m == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    (mean, (var / m as f64).sqrt())
}

pub fn run_monte_carlo(scenario: &SimulationScenario) -> Result<MonteCarloReport> {
    scenario.validate()?;
    let outcomes: Vec<Result<ReplicationOutcome>> = (0..scenario.replications)
        .into_par_iter()
        .map(|r| run_replication(scenario, r))
        .collect();
    let ok: Vec<&ReplicationOutcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let failures = outcomes.len() - ok.len();
    let errors: Vec<f64> = ok.iter().map(|o| o.error).collect();
    let (mean_error, se) = mean_and_se(&errors);
    let denom = ok.len().max(1) as f64;
    Ok(MonteCarloReport {
        error_dist: scenario.error_dist,
        correlation: scenario.correlation,
        penalty: scenario.penalty_family,
        h: scenario.h,
        condition: scenario.condition,
        n: scenario.n,
        d: scenario.d,
        mean_error,
        se,
        mean_size: ok.iter().map(|o| o.size as f64).sum::<f64>() / denom,
        mean_tp: ok.iter().map(|o| o.true_positives as f64).sum::<f64>() / denom,
        replications: scenario.replications,
        failures,
        valid: failures * 10 <= scenario.replications,
        seed: scenario.seed,
        errors,
    })
}

/// A grid of scenarios sharing sample size, dimension and seed. This is
/// the shape of the `simulate` run-config JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub n: usize,
    pub d: usize,
    pub replications: usize,
    pub seed: u64,
    pub me_variance: f64,
    pub noise_scale: f64,
    pub clip_floor: f64,
    pub error_dists: Vec<ErrorDist>,
    pub correlations: Vec<Correlation>,
    pub penalties: Vec<PenaltyFamily>,
    pub hs: Vec<f64>,
    pub conditions: Vec<Condition>,
    pub missingness: MissingnessModel,
    pub fit: FitConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            n: 100,
            d: 300,
            replications: 300,
            seed: 20_240_101,
            me_variance: 0.3,
            noise_scale: 1.0,
            clip_floor: DEFAULT_CLIP_FLOOR,
            error_dists: vec![ErrorDist::Normal01, ErrorDist::T3, ErrorDist::ChiSq2],
            correlations: vec![Correlation::Corr, Correlation::Ind],
            penalties: PenaltyFamily::ALL.to_vec(),
            hs: vec![0.1, 1.0, 10.0],
            conditions: Condition::ALL.to_vec(),
            missingness: MissingnessModel::default(),
            fit: FitConfig::default(),
        }
    }
}

impl StudyConfig {
    /// Scenarios in report order: condition, error distribution,
    /// correlation, penalty, h.
    pub fn scenarios(&self) -> Vec<SimulationScenario> {
        let mut out = Vec::new();
        for &condition in &self.conditions {
            for &error_dist in &self.error_dists {
                for &correlation in &self.correlations {
                    for &penalty_family in &self.penalties {
                        for &h in &self.hs {
                            out.push(SimulationScenario {
                                n: self.n,
                                d: self.d,
                                correlation,
                                error_dist,
                                condition,
                                penalty_family,
                                h,
                                me_variance: self.me_variance,
                                noise_scale: self.noise_scale,
                                missingness: self.missingness.clone(),
                                clip_floor: self.clip_floor,
                                replications: self.replications,
                                seed: self.seed,
                                fit: self.fit.clone(),
                            });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.error_dists.is_empty()
            || self.correlations.is_empty()
            || self.penalties.is_empty()
            || self.hs.is_empty()
            || self.conditions.is_empty()
        {
            return Err(Error::Config("every scenario axis needs at least one value".into()));
        }
        self.scenarios().iter().try_for_each(SimulationScenario::validate)
    }
}

pub fn run_study(study: &StudyConfig) -> Result<Vec<MonteCarloReport>> {
    study.validate()?;
    study.scenarios().iter().map(run_monte_carlo).collect()
}

pub const REPORT_HEADER: &str =
    "error_dist,correlation,penalty,h,condition,mean_error,se,mean_size,mean_tp,failures,seed";

/// CSV rendering of a study, one line per scenario.
pub fn report_csv(reports: &[MonteCarloReport]) -> String {
    let mut s = String::from(REPORT_HEADER);
    s.push('\n');
    for r in reports {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:.6},{:.6},{:.4},{:.4},{},{}",
            r.error_dist.as_str(),
            r.correlation.as_str(),
            r.penalty.as_str(),
            r.h,
            r.condition.as_str(),
            r.mean_error,
            r.se,
            r.mean_size,
            r.mean_tp,
            r.failures,
            r.seed
        );
    }
    s
}

/// Markdown table with one block per condition, rows by error distribution
/// and correlation, and columns by penalty and `h`.
pub fn report_markdown(reports: &[MonteCarloReport]) -> String {
    fn uniq<T: PartialEq + Copy>(it: impl Iterator<Item = T>) -> Vec<T> {
        let mut v: Vec<T> = Vec::new();
        for x in it {
            if !v.contains(&x) {
                v.push(x);
            }
        }
        v
    }
    let conditions = uniq(reports.iter().map(|r| r.condition));
    let dists = uniq(reports.iter().map(|r| r.error_dist));
    let corrs = uniq(reports.iter().map(|r| r.correlation));
    let pens = uniq(reports.iter().map(|r| r.penalty));
    let hs = uniq(reports.iter().map(|r| r.h));
    let mut s = String::new();
    if let Some(first) = reports.first() {
        let _ = writeln!(
            s,
            "Model error |w_hat - w|^2, n={}, d={}, {} replications, seed {}\n",
            first.n, first.d, first.replications, first.seed
        );
    }
    let mut header = String::from("| Error | Covariates |");
    let mut rule = String::from("|---|---|");
    for p in &pens {
        for h in &hs {
            let _ = write!(header, " {p} h={h} |");
            rule.push_str("---:|");
        }
    }
    for c in conditions {
        let _ = writeln!(s, "**{}**\n", c.label());
        let _ = writeln!(s, "{header}\n{rule}");
        for &dist in &dists {
            for &corr in &corrs {
                let _ = write!(s, "| {} | {} |", dist.label(), corr.as_str());
                for &p in &pens {
                    for &h in &hs {
                        let cell = reports.iter().find(|r| {
                            r.condition == c && r.error_dist == dist && r.correlation == corr && r.penalty == p && r.h == h
                        });
                        match cell {
                            Some(r) if r.valid => {
                                let _ = write!(s, " {:.3} |", r.mean_error);
                            }
                            Some(_) => s.push_str(" invalid |"),
                            None => s.push_str(" - |"),
                        }
                    }
                }
                s.push('\n');
            }
        }
        s.push('\n');
    }
    s
}
