//! Penalized fitting and HBIC selection of the penalty level.
//!
//! The solver minimizes `(L(w) + sum_k p_f(|w_k|)) / n`, where `L` is the
//! weighted data-fit term. Each iteration takes a gradient step (penalty
//! derivative only on nonzero coordinates) of length `eta`, zeroes every
//! coordinate whose magnitude falls below `eta * f`, and backtracks by
//! halving `eta` until the penalized objective decreases. A zero coordinate
//! therefore survives a step only when its per-row gradient `|dL/dw_k| / n`
//! reaches `f`, whatever step the line search settles on. When no step that
//! admits new coordinates decreases the objective, the step is retried with
//! the active set frozen, and new coordinates are tried again once the
//! active set is stationary.
//!
//! Bounded penalties such as Atan make every zero coordinate a strict local
//! minimum, so gradient steps alone can leave a useful coordinate at zero,
//! or keep a poor one away from it. Before stopping, the solver therefore
//! probes each zero coordinate at a ladder of magnitudes and each nonzero
//! coordinate at zero, moves to the best probe if it lowers the penalized
//! objective, then resumes gradient descent.

use ndarray::{Array1, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Condition, FitConfig};
use crate::dataset::{Coefficients, Dataset};
use crate::error::{Error, Result};
use crate::loss::{weighted_objective, DataFit};
use crate::penalty::{PenaltyFamily, PenaltySpec};
use crate::propensity::PropensityWeights;

/// One evaluated grid point of the HBIC search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HbicPoint {
    pub f: f64,
    pub hbic: f64,
    pub size: usize,
    pub objective: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Active-set gradient norm of the per-row penalized objective at exit.
    pub final_grad_norm: f64,
    /// Backtracking exhausted without finding a decrease.
    pub stalled: bool,
    /// Zeroing threshold applied at the last accepted step. Every nonzero
    /// coefficient is at least this large in magnitude.
    pub threshold: f64,
    pub zero_variance_columns: Vec<usize>,
    pub n_complete: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub omega_hat: Coefficients,
    /// Sorted indices of the nonzero coefficients.
    pub active_set: Vec<usize>,
    /// Weighted data-fit term at `omega_hat`.
    pub objective: f64,
    /// Data-fit term plus penalty.
    pub penalized_objective: f64,
    pub hbic: f64,
    pub f_selected: f64,
    pub penalty: PenaltyFamily,
    pub h: f64,
    pub condition: Condition,
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
    pub diagnostics: FitDiagnostics,
    /// Every grid point tried by [`select_f`], ascending in `f`. Empty for a
    /// single fit.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hbic_path: Vec<HbicPoint>,
}

/// Per-iteration record of the penalized objective (divided by `n`).
#[derive(Debug, Clone, Default)]
pub struct FitTrace {
    pub objective: Vec<f64>,
}

/// `log(objective) + |S| * log(log n) / n * E_n` with `E_n = en_rule * log d`.
///
/// The objective is clamped below at machine epsilon so a perfect fit
/// yields a large negative but finite value.
pub fn hbic_value(objective: f64, size: usize, n: usize, d: usize, en_rule: f64) -> Result<f64> {
    if !(objective >= 0.0) || !objective.is_finite() {
        return Err(Error::Domain(format!("objective {objective} is not a valid loss value")));
    }
    let n = n as f64;
    let e_n = en_rule * (d as f64).ln();
    Ok(objective.max(f64::EPSILON).ln() + size as f64 * n.ln().ln() / n * e_n)
}

/// HBIC of a fitted result, recomputing the data-fit term from `data`.
pub fn hbic(
    data: &Dataset,
    weights: &PropensityWeights,
    result: &EstimateResult,
    cfg: &FitConfig,
) -> Result<f64> {
    let obj = weighted_objective(data, &result.omega_hat, cfg, weights)?;
    hbic_value(obj, result.active_set.len(), data.nrows(), data.ncols(), cfg.en_rule)
}

/// Magnitudes tried when switching on a zero coordinate.
const ESCAPE_LADDER: [f64; 13] = [
    1.0 / 256.0,
    1.0 / 128.0,
    1.0 / 64.0,
    1.0 / 32.0,
    1.0 / 16.0,
    0.125,
    0.25,
    0.5,
    1.0,
    2.0,
    4.0,
    8.0,
    16.0,
];

/// Relative decrease an escape probe must achieve to be taken.
const ESCAPE_MIN_GAIN: f64 = 1e-12;

struct Solver<'a> {
    fit: DataFit,
    pen: &'a PenaltySpec,
    cfg: &'a FitConfig,
    n: f64,
}

struct Step {
    omega: Array1<f64>,
    residuals: Array1<f64>,
    data_fit: f64,
    q: f64,
    eta: f64,
}

struct SolveOutcome {
    omega: Array1<f64>,
    data_fit: f64,
    penalized: f64,
    iterations: usize,
    converged: bool,
    stalled: bool,
    grad_norm: f64,
    threshold: f64,
}

impl<'a> Solver<'a> {
    fn penalty(&self, w: ArrayView1<'_, f64>) -> f64 {
        w.iter()
            .filter(|v| **v != 0.0)
            .map(|&v| self.pen.value_unchecked(v))
            .sum()
    }

    /// Gradient of the per-row penalized objective. Zero coordinates carry
    /// the smooth part only.
    fn gradient(&self, w: ArrayView1<'_, f64>, e: &Array1<f64>) -> Array1<f64> {
        let mut g = self.fit.gradient_from_residuals(w, e) / self.n;
        for (gk, &wk) in g.iter_mut().zip(w) {
            if wk != 0.0 {
                *gk += self.pen.derivative_unchecked(wk) / self.n;
            }
        }
        g
    }

    /// Fixed-point test: the active gradient is small and no zero
    /// coordinate would survive a step of any length.
    fn stationarity(&self, w: ArrayView1<'_, f64>, g: &Array1<f64>) -> (f64, bool) {
        let mut norm_sq = 0.0;
        let mut entering = false;
        for (&wk, &gk) in w.iter().zip(g) {
            if wk != 0.0 {
                norm_sq += gk * gk;
            } else if gk.abs() >= self.pen.f {
                entering = true;
            }
        }
        (norm_sq.sqrt(), entering)
    }

    /// Backtracking search along `-g` from `eta`. With `allow_entry` false,
    /// coordinates that are zero in `w` stay zero.
    fn line_search(
        &self,
        w: &Array1<f64>,
        g: &Array1<f64>,
        q: f64,
        mut eta: f64,
        allow_entry: bool,
        iteration: usize,
    ) -> Result<Option<Step>> {
        for _ in 0..=self.cfg.optimizer.max_halvings {
            let cut = eta * self.pen.f;
            let mut omega = w - &(g * eta);
            for (c, &wk) in omega.iter_mut().zip(w) {
                if c.abs() < cut || (!allow_entry && wk == 0.0) {
                    *c = 0.0;
                }
            }
            let residuals = self.fit.raw_residuals(omega.view());
            let data_fit = self.fit.value_from_residuals(omega.view(), &residuals);
            let q_new = (data_fit + self.penalty(omega.view())) / self.n;
            if !q_new.is_finite() {
                return Err(Error::NonFiniteObjective { iteration });
            }
            if q_new < q {
                return Ok(Some(Step {
                    omega,
                    residuals,
                    data_fit,
                    q: q_new,
                    eta,
                }));
            }
            eta *= 0.5;
        }
        Ok(None)
    }

    /// Best single-coordinate move, when it lowers the per-row objective
    /// below `q`: a zero coordinate switched on at one of the ladder
    /// magnitudes, or a nonzero coordinate switched off.
    fn escape(&self, w: &Array1<f64>, e: &Array1<f64>, g: &Array1<f64>, q: f64, threshold: f64) -> Option<(usize, f64)> {
        let norm_sq = w.dot(w);
        let base = self.penalty(w.view());
        let mut best: Option<(usize, f64, f64)> = None;
        let mut consider = |k: usize, t: f64, q_new: f64| {
            if q_new < best.map_or(q, |b| b.2) {
                best = Some((k, t, q_new));
            }
        };
        for (k, (&wk, &gk)) in w.iter().zip(g).enumerate() {
            if wk != 0.0 {
                let fit = self.fit.value_with_coordinate(e, norm_sq, k, wk, 0.0);
                consider(k, 0.0, (fit + base - self.pen.value_unchecked(wk)) / self.n);
                continue;
            }
            let signs: &[f64] = if gk > 0.0 {
                &[-1.0]
            } else if gk < 0.0 {
                &[1.0]
            } else {
                &[1.0, -1.0]
            };
            for &sign in signs {
                for &mag in ESCAPE_LADDER.iter().filter(|&&m| m >= threshold) {
                    let t = sign * mag;
                    let fit = self.fit.value_with_coordinate(e, norm_sq, k, 0.0, t);
                    consider(k, t, (fit + base + self.pen.value_unchecked(t)) / self.n);
                }
            }
        }
        best.filter(|b| b.2 < q - ESCAPE_MIN_GAIN * q.abs().max(1.0)).map(|b| (b.0, b.1))
    }

    fn solve(&self, init: Array1<f64>, mut trace: Option<&mut FitTrace>) -> Result<SolveOutcome> {
        let opt = self.cfg.optimizer;
        let mut eta = opt.step_size;
        let mut threshold = eta * self.pen.f;
        let mut w = init;
        w.mapv_inplace(|v| if v.abs() < threshold { 0.0 } else { v });
        let mut e = self.fit.raw_residuals(w.view());
        let mut data_fit = self.fit.value_from_residuals(w.view(), &e);
        let mut q = (data_fit + self.penalty(w.view())) / self.n;
        if !q.is_finite() {
            return Err(Error::NonFiniteObjective { iteration: 0 });
        }
        if let Some(t) = trace.as_deref_mut() {
            t.objective.push(q);
        }
        let mut iterations = 0;
        let mut stalled = false;
        let mut converged = false;
        // Set when a step admitting new coordinates failed; new coordinates
        // are then retried only once the active set is stationary.
        let mut entry_blocked = false;
        let mut grad_norm;
        loop {
            let g = self.gradient(w.view(), &e);
            let (norm, entering) = self.stationarity(w.view(), &g);
            grad_norm = norm;
            let active_done = norm <= opt.grad_tol;
            if iterations >= opt.max_iters {
                break;
            }
            let mut step = None;
            if !(active_done && !entering) {
                iterations += 1;
                let allow_entry = entering && (!entry_blocked || active_done);
                step = self.line_search(&w, &g, q, eta, allow_entry, iterations)?;
                if step.is_none() && allow_entry && !active_done {
                    entry_blocked = true;
                    step = self.line_search(&w, &g, q, eta, false, iterations)?;
                } else if step.is_some() && allow_entry {
                    entry_blocked = false;
                }
            }
            if step.is_none() && active_done {
                // stationary: try switching one coordinate on or off
                match self.escape(&w, &e, &g, q, threshold) {
                    Some((k, t)) => {
                        if !entering {
                            iterations += 1;
                        }
                        let mut omega = w.clone();
                        omega[k] = t;
                        let residuals = self.fit.raw_residuals(omega.view());
                        let fit = self.fit.value_from_residuals(omega.view(), &residuals);
                        let q_new = (fit + self.penalty(omega.view())) / self.n;
                        if !q_new.is_finite() {
                            return Err(Error::NonFiniteObjective { iteration: iterations });
                        }
                        if q_new < q {
                            entry_blocked = false;
                            w = omega;
                            e = residuals;
                            data_fit = fit;
                            q = q_new;
                            if let Some(t) = trace.as_deref_mut() {
                                t.objective.push(q);
                            }
                            continue;
                        }
                        converged = true;
                        break;
                    }
                    None => {
                        converged = true;
                        break;
                    }
                }
            }
            let Some(step) = step else {
                stalled = true;
                break;
            };
            debug_assert!(step.q <= q);
            w = step.omega;
            e = step.residuals;
            data_fit = step.data_fit;
            q = step.q;
            threshold = step.eta * self.pen.f;
            if let Some(t) = trace.as_deref_mut() {
                t.objective.push(q);
            }
            eta = (step.eta * 2.0).min(opt.step_size);
        }
        Ok(SolveOutcome {
            omega: w,
            data_fit,
            penalized: q * self.n,
            iterations,
            converged,
            stalled,
            grad_norm,
            threshold,
        })
    }
}

fn validate_inputs(data: &Dataset, weights: &PropensityWeights, pen: &PenaltySpec, cfg: &FitConfig) -> Result<()> {
    cfg.validate()?;
    pen.validate()?;
    if data.nrows() < 2 {
        return Err(Error::InvalidData(format!("need at least 2 rows, got {}", data.nrows())));
    }
    if data.n_complete() == 0 {
        return Err(Error::NoCompleteObservations);
    }
    if weights.len() != data.nrows() {
        return Err(Error::Dimension(format!("{} weights for {} rows", weights.len(), data.nrows())));
    }
    Ok(())
}

/// Fits at the penalty level in `pen`, starting as `cfg.init` prescribes.
///
/// With continuation, iteration counts of all stages are summed; every
/// other field describes the final stage.
pub fn fit_penalized(
    data: &Dataset,
    weights: &PropensityWeights,
    pen: &PenaltySpec,
    cfg: &FitConfig,
) -> Result<EstimateResult> {
    validate_inputs(data, weights, pen, cfg)?;
    let mut init = Coefficients::zeros(data.ncols());
    let mut iterations = 0;
    let mut stages = cfg.init.stages(cfg.h).into_iter().peekable();
    while let Some(h) = stages.next() {
        let stage_cfg = FitConfig { h, ..cfg.clone() };
        let mut r = fit_penalized_from(data, weights, pen, &stage_cfg, &init, None)?;
        iterations += r.iterations;
        if stages.peek().is_none() {
            r.iterations = iterations;
            return Ok(r);
        }
        init = r.omega_hat;
    }
    unreachable!("stages always contain the target h")
}

/// Fits from an explicit starting point, optionally recording the objective
/// at every accepted iteration.
pub fn fit_penalized_from(
    data: &Dataset,
    weights: &PropensityWeights,
    pen: &PenaltySpec,
    cfg: &FitConfig,
    init: &Coefficients,
    trace: Option<&mut FitTrace>,
) -> Result<EstimateResult> {
    validate_inputs(data, weights, pen, cfg)?;
    if init.len() != data.ncols() {
        return Err(Error::Dimension(format!("{} initial coefficients for {} columns", init.len(), data.ncols())));
    }
    let fit = DataFit::new(data, weights, cfg)?;
    let n_complete = fit.n_complete();
    let solver = Solver {
        fit,
        pen,
        cfg,
        n: data.nrows() as f64,
    };
    let out = solver.solve(Array1::from(init.as_slice().to_vec()), trace)?;
    let omega_hat = Coefficients::new(out.omega.to_vec())?;
    let active_set = omega_hat.support();
    let hbic = hbic_value(out.data_fit, active_set.len(), data.nrows(), data.ncols(), cfg.en_rule)?;
    Ok(EstimateResult {
        omega_hat,
        active_set,
        objective: out.data_fit,
        penalized_objective: out.penalized,
        hbic,
        f_selected: pen.f,
        penalty: pen.family,
        h: cfg.h,
        condition: cfg.condition,
        iterations: out.iterations,
        converged: out.converged,
        seed: 0,
        diagnostics: FitDiagnostics {
            final_grad_norm: out.grad_norm,
            stalled: out.stalled,
            threshold: out.threshold,
            zero_variance_columns: data.zero_variance_columns(),
            n_complete,
        },
        hbic_path: Vec::new(),
    })
}

/// Fits once per value of `cfg.hbic_grid` and keeps the fit with the
/// smallest HBIC, preferring the larger `f` on ties. The `f` carried by
/// `pen` is ignored.
pub fn select_f(
    data: &Dataset,
    weights: &PropensityWeights,
    pen: &PenaltySpec,
    cfg: &FitConfig,
) -> Result<EstimateResult> {
    validate_inputs(data, weights, &pen.with_f(cfg.hbic_grid[0].max(0.0)), cfg)?;
    let mut grid = cfg.hbic_grid.clone();
    grid.sort_by(|a, b| a.total_cmp(b));
    let fits: Vec<EstimateResult> = grid
        .par_iter()
        .map(|&f| fit_penalized(data, weights, &pen.with_f(f), cfg))
        .collect::<Result<_>>()?;
    let path: Vec<HbicPoint> = fits
        .iter()
        .map(|r| HbicPoint {
            f: r.f_selected,
            hbic: r.hbic,
            size: r.active_set.len(),
            objective: r.objective,
            converged: r.converged,
        })
        .collect();
    let mut best = 0;
    for (i, r) in fits.iter().enumerate() {
        if r.hbic <= fits[best].hbic {
            best = i;
        }
    }
    let mut result = fits.into_iter().nth(best).expect("grid is non-empty");
    result.hbic_path = path;
    Ok(result)
}
