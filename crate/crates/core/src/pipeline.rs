//! The `fit` command: ingest a table, optionally screen its columns, and fit
//! every requested (condition, penalty, h) combination.
//!
//! Artifacts written to the output directory:
//!
//! * `result.json`: resolved config, seed, screening, propensity summary and
//!   every fit with its HBIC path.
//! * `features.md`: top coefficients per penalty and `h`.
//! * `summary.md`: per penalty and `h`, the cross-validated held-out
//!   objective (a bias proxy; no true coefficients exist for real data) and
//!   the selected model size.
//!
//! Everything is computed before the first file is written, and each file
//! is written atomically, so a failed run leaves no outputs behind.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Condition, FitConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimator::{fit_penalized, select_f, EstimateResult};
use crate::io::{ingest_csv, write_string_atomic};
use crate::loss::weighted_objective;
use crate::penalty::{PenaltyFamily, PenaltySpec};
use crate::propensity::{estimate_propensity_default, PropensityWeights, DEFAULT_CLIP_FLOOR};
use crate::screening::{screen_columns, ScreeningResult};

pub const RESULT_FILE: &str = "result.json";
pub const FEATURES_FILE: &str = "features.md";
pub const SUMMARY_FILE: &str = "summary.md";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScreenSettings {
    /// Columns drawn at random before ranking; capped at the number of
    /// columns.
    pub subsample_size: usize,
    /// Columns kept for fitting; capped at the subsample size.
    pub keep: usize,
}

impl Default for ScreenSettings {
    fn default() -> Self {
        Self {
            subsample_size: 3000,
            keep: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitRunConfig {
    pub input: PathBuf,
    pub response_column: String,
    /// Replaces the default NA tokens (empty cell, `NA`).
    pub na_token: Option<String>,
    pub output_dir: PathBuf,
    pub conditions: Vec<Condition>,
    pub penalties: Vec<PenaltyFamily>,
    pub hs: Vec<f64>,
    pub screen: Option<ScreenSettings>,
    /// Coefficients listed per fit in the feature table.
    pub top_features: usize,
    pub cv_folds: usize,
    pub clip_floor: f64,
    pub seed: u64,
    pub fit: FitConfig,
}

impl Default for FitRunConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::new(),
            response_column: "y".into(),
            na_token: None,
            output_dir: PathBuf::from("robsel-out"),
            conditions: vec![Condition::FullCorrection],
            penalties: PenaltyFamily::ALL.to_vec(),
            hs: vec![0.1, 1.0, 10.0],
            screen: Some(ScreenSettings::default()),
            top_features: 5,
            cv_folds: 5,
            clip_floor: DEFAULT_CLIP_FLOOR,
            seed: 20_240_101,
            fit: FitConfig::default(),
        }
    }
}

impl FitRunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input.as_os_str().is_empty() {
            return Err(Error::Config("no input file given".into()));
        }
        if self.conditions.is_empty() || self.penalties.is_empty() || self.hs.is_empty() {
            return Err(Error::Config("conditions, penalties and hs must be non-empty".into()));
        }
        if self.cv_folds < 2 {
            return Err(Error::Config(format!("cv_folds must be at least 2, got {}", self.cv_folds)));
        }
        if !(self.clip_floor > 0.0 && self.clip_floor < 1.0) {
            return Err(Error::Config("clip_floor must lie in (0, 1)".into()));
        }
        if let Some(s) = &self.screen {
            if s.keep == 0 {
                return Err(Error::Config("screen.keep must be positive".into()));
            }
        }
        for name in [RESULT_FILE, FEATURES_FILE, SUMMARY_FILE] {
            if same_path(&self.input, &self.output_dir.join(name)) {
                return Err(Error::Config(format!("input file would be overwritten by {name}")));
            }
        }
        for &h in &self.hs {
            self.fit.clone().with_h(h).validate()?;
        }
        Ok(())
    }
}

fn same_path(a: &Path, b: &Path) -> bool {
    fn lexical(p: &Path) -> PathBuf {
        p.components().filter(|c| !matches!(c, std::path::Component::CurDir)).collect()
    }
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => lexical(a) == lexical(b),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    /// Column index in the fitted (possibly screened) table.
    pub index: usize,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRun {
    pub condition: Condition,
    pub penalty: PenaltyFamily,
    pub h: f64,
    /// Largest coefficients by magnitude, at most `top_features`.
    pub features: Vec<Feature>,
    /// Mean held-out weighted objective per row over the CV folds.
    pub cv_objective: f64,
    pub size: usize,
    pub estimate: EstimateResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensitySummary {
    pub condition: Condition,
    pub bandwidth: Option<f64>,
    pub min_prob: f64,
    pub clipped_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub rows: usize,
    pub cols: usize,
    pub complete_rows: usize,
    pub missing_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub seed: u64,
    pub config: FitRunConfig,
    pub input_data: DataSummary,
    pub screening: Option<ScreeningResult>,
    pub fitted_data: DataSummary,
    pub propensity: Vec<PropensitySummary>,
    pub runs: Vec<FitRun>,
}

fn summarize(data: &Dataset) -> DataSummary {
    DataSummary {
        rows: data.nrows(),
        cols: data.ncols(),
        complete_rows: data.n_complete(),
        missing_columns: data.missing_block().iter().map(|&k| data.column_names()[k].clone()).collect(),
    }
}

/// Propensity weights when the condition uses IPW, unit weights otherwise.
pub fn weights_for(data: &Dataset, condition: Condition, clip_floor: f64) -> Result<PropensityWeights> {
    if condition.uses_ipw() {
        estimate_propensity_default(data, clip_floor)
    } else {
        Ok(PropensityWeights::unit(data.nrows()))
    }
}

/// Coefficients of the active set, largest magnitude first, ties to the
/// lower index.
pub fn top_features(data: &Dataset, est: &EstimateResult, k: usize) -> Vec<Feature> {
    let w = est.omega_hat.as_slice();
    let mut active = est.active_set.clone();
    active.sort_by(|&a, &b| w[b].abs().total_cmp(&w[a].abs()).then(a.cmp(&b)));
    active
        .into_iter()
        .take(k)
        .map(|index| Feature {
            name: data.column_names()[index].clone(),
            index,
            coefficient: w[index],
        })
        .collect()
}

/// Deterministic fold labels: a seeded shuffle of the rows dealt round
/// robin into `folds` groups.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut label = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        label[i] = pos % folds;
    }
    label
}

/// Mean per-row weighted objective on held-out folds. Each training fit
/// uses the penalty level in `pen` and estimates its own weights; held-out
/// rows are weighted by propensities estimated on the full table.
pub fn cross_validated_objective(
    data: &Dataset,
    full_weights: &PropensityWeights,
    pen: &PenaltySpec,
    cfg: &FitConfig,
    folds: usize,
    seed: u64,
    clip_floor: f64,
) -> Result<f64> {
    let n = data.nrows();
    if folds > n {
        return Err(Error::Config(format!("{folds} folds for {n} rows")));
    }
    let labels = fold_assignment(n, folds, seed);
    let mut total = 0.0;
    for fold in 0..folds {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| labels[i] == fold);
        let train_data = data.select_rows(&train)?;
        let train_weights = weights_for(&train_data, cfg.condition, clip_floor)?;
        let est = fit_penalized(&train_data, &train_weights, pen, cfg)?;
        let test_data = data.select_rows(&test)?;
        total += weighted_objective(&test_data, &est.omega_hat, cfg, &full_weights.select(&test))?;
    }
    Ok(total / n as f64)
}

/// Runs the whole command in memory.
pub fn run_fit(cfg: &FitRunConfig) -> Result<FitReport> {
    cfg.validate()?;
    let raw = ingest_csv(&cfg.input, &cfg.response_column, cfg.na_token.as_deref())?;
    let input_data = summarize(&raw);
    let (data, screening) = match &cfg.screen {
        Some(s) => {
            let m = s.subsample_size.min(raw.ncols());
            let k = s.keep.min(m);
            let res = screen_columns(&raw, k, m, cfg.seed)?;
            (raw.select_columns(&res.indices())?, Some(res))
        }
        None => (raw, None),
    };

    let mut propensity = Vec::new();
    let mut runs = Vec::new();
    for &condition in &cfg.conditions {
        let weights = weights_for(&data, condition, cfg.clip_floor)?;
        propensity.push(PropensitySummary {
            condition,
            bandwidth: condition.uses_ipw().then(|| weights.bandwidth()),
            min_prob: weights.probs().iter().copied().fold(1.0, f64::min),
            clipped_rows: weights.clipped_rows().len(),
        });
        for &penalty in &cfg.penalties {
            for &h in &cfg.hs {
                let fit_cfg = cfg.fit.clone().with_h(h).with_condition(condition);
                let pen = PenaltySpec::new(penalty, 0.0).with_u(fit_cfg.atan_u);
                let mut estimate = select_f(&data, &weights, &pen, &fit_cfg)?;
                estimate.seed = cfg.seed;
                let cv_objective =
                    cross_validated_objective(
                    &data,
                    &weights,
                    &pen.with_f(estimate.f_selected),
                    &fit_cfg,
                    cfg.cv_folds,
                    cfg.seed,
                    cfg.clip_floor,
                )?;
                runs.push(FitRun {
                    condition,
                    penalty,
                    h,
                    features: top_features(&data, &estimate, cfg.top_features),
                    cv_objective,
                    size: estimate.active_set.len(),
                    estimate,
                });
            }
        }
    }
    Ok(FitReport {
        seed: cfg.seed,
        config: cfg.clone(),
        input_data,
        screening,
        fitted_data: summarize(&data),
        propensity,
        runs,
    })
}

fn provenance(report: &FitReport) -> Result<String> {
    Ok(format!(
        "seed: {}\n\n```json\n{}\n```\n",
        report.seed,
        serde_json::to_string_pretty(&report.config)?
    ))
}

/// One row per (condition, penalty, h) listing the top features.
pub fn features_markdown(report: &FitReport) -> Result<String> {
    let k = report.runs.iter().map(|r| r.features.len()).max().unwrap_or(0).max(1);
    let mut s = String::from("# Selected features\n\n");
    s.push_str("| Condition | Method |");
    for j in 1..=k {
        let _ = write!(s, " {j} |");
    }
    s.push_str("\n|---|---|");
    s.push_str(&"---|".repeat(k));
    s.push('\n');
    for r in &report.runs {
        let _ = write!(s, "| {} | {}(h={}) |", r.condition, r.penalty, r.h);
        for j in 0..k {
            match r.features.get(j) {
                Some(f) => {
                    let _ = write!(s, " {} |", f.name);
                }
                None => s.push_str(" |"),
            }
        }
        s.push('\n');
    }
    s.push('\n');
    s.push_str(&provenance(report)?);
    Ok(s)
}

/// One block per condition, rows by `h`, columns by penalty with the CV
/// objective ("bias" proxy) and model size.
pub fn summary_markdown(report: &FitReport) -> Result<String> {
    let cfg = &report.config;
    let mut s = String::from(
        "# Summary\n\nbias: mean held-out weighted objective per row from cross-validation at the selected f (proxy). \
         size: number of selected columns.\n\n",
    );
    for &c in &cfg.conditions {
        let _ = writeln!(s, "**{}**\n", c.label());
        s.push_str("| h |");
        for p in &cfg.penalties {
            let _ = write!(s, " {p} bias | {p} size |");
        }
        s.push_str("\n|---|");
        s.push_str(&"---:|---:|".repeat(cfg.penalties.len()));
        s.push('\n');
        for &h in &cfg.hs {
            let _ = write!(s, "| {h} |");
            for &p in &cfg.penalties {
                match report.runs.iter().find(|r| r.condition == c && r.penalty == p && r.h == h) {
                    Some(r) => {
                        let _ = write!(s, " {:.4} | {} |", r.cv_objective, r.size);
                    }
                    None => s.push_str(" - | - |"),
                }
            }
            s.push('\n');
        }
        s.push('\n');
    }
    s.push_str(&provenance(report)?);
    Ok(s)
}

/// Writes the artifacts of a finished run.
pub fn write_fit_outputs(report: &FitReport, dir: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(report)?;
    let features = features_markdown(report)?;
    let summary = summary_markdown(report)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    write_string_atomic(&dir.join(RESULT_FILE), &json)?;
    write_string_atomic(&dir.join(FEATURES_FILE), &features)?;
    write_string_atomic(&dir.join(SUMMARY_FILE), &summary)
}

/// Runs the `fit` command end to end.
pub fn run_fit_command(cfg: &FitRunConfig) -> Result<FitReport> {
    let report = run_fit(cfg)?;
    write_fit_outputs(&report, &cfg.output_dir)?;
    Ok(report)
}

/// Machine-readable error document.
pub fn error_json(err: &Error) -> String {
    serde_json::json!({
        "error": {
            "kind": err.kind(),
            "message": err.to_string(),
            "exit_code": err.exit_code(),
        }
    })
    .to_string()
}
