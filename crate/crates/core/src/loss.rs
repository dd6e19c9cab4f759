//! Exponential squared loss and the weighted data-fit objective.
//!
//! For a residual `r` the loss is `1 - exp(-r^2 / h)`. It behaves like
//! `r^2 / h` when `h` is large and saturates at 1 when `h` is small, which
//! bounds the influence of any single observation.
//!
//! The data-fit term sums `loss(r_i) / pi_i` over complete rows. Under
//! conditions that correct for measurement error, `r_i` is the orthogonal
//! residual `(y_i - t_i' w) / sqrt(1 + |w|^2)`.

use ndarray::{Array1, Array2, ArrayView1};

use crate::config::FitConfig;
use crate::dataset::{Coefficients, Dataset};
use crate::error::{Error, Result};
use crate::propensity::PropensityWeights;

fn check_args(residual: f64, h: f64) -> Result<()> {
    if !residual.is_finite() {
        return Err(Error::Domain(format!("residual {residual} is not finite")));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("h must be positive and finite, got {h}")));
    }
    Ok(())
}

#[inline]
fn loss_unchecked(r: f64, h: f64) -> f64 {
    // -expm1 keeps precision when r^2/h is tiny
    -(-r * r / h).exp_m1()
}

#[inline]
fn loss_grad_unchecked(r: f64, h: f64) -> f64 {
    2.0 * r / h * (-r * r / h).exp()
}

/// `1 - exp(-residual^2 / h)`.
pub fn exp_sq_loss(residual: f64, h: f64) -> Result<f64> {
    check_args(residual, h)?;
    Ok(loss_unchecked(residual, h))
}

/// Derivative of [`exp_sq_loss`] with respect to the residual.
pub fn exp_sq_loss_grad(residual: f64, h: f64) -> Result<f64> {
    check_args(residual, h)?;
    Ok(loss_grad_unchecked(residual, h))
}

/// `(y - t_row' omega) / sqrt(1 + |omega|^2)`.
pub fn orthogonal_residual(y: f64, t_row: ArrayView1<'_, f64>, omega: &Coefficients) -> Result<f64> {
    if t_row.len() != omega.len() {
        return Err(Error::Dimension(format!(
            "row has {} entries, coefficients have {}",
            t_row.len(),
            omega.len()
        )));
    }
    let fitted = t_row.dot(&omega.view());
    Ok((y - fitted) / (1.0 + omega.norm_sq()).sqrt())
}

/// Weighted data-fit term over the complete rows.
pub fn weighted_objective(
    data: &Dataset,
    omega: &Coefficients,
    cfg: &FitConfig,
    weights: &PropensityWeights,
) -> Result<f64> {
    let fit = DataFit::new(data, weights, cfg)?;
    fit.check_dim(omega.len())?;
    Ok(fit.value(omega.view()))
}

/// Analytic gradient of [`weighted_objective`] with respect to `omega`.
pub fn objective_gradient(
    data: &Dataset,
    omega: &Coefficients,
    cfg: &FitConfig,
    weights: &PropensityWeights,
) -> Result<Vec<f64>> {
    let fit = DataFit::new(data, weights, cfg)?;
    fit.check_dim(omega.len())?;
    Ok(fit.gradient(omega.view()).to_vec())
}

/// The data-fit term with complete rows and their weights packed densely.
///
/// Incomplete rows are dropped at construction, so absent cells are never
/// touched afterwards.
#[derive(Debug, Clone)]
pub struct DataFit {
    /// Complete rows, transposed (`d x n_complete`) so a column of the
    /// design is contiguous.
    xt: Array2<f64>,
    y: Array1<f64>,
    w: Array1<f64>,
    h: f64,
    orthogonal: bool,
    n_total: usize,
}

impl DataFit {
    pub fn new(data: &Dataset, weights: &PropensityWeights, cfg: &FitConfig) -> Result<Self> {
        if !(cfg.h > 0.0 && cfg.h.is_finite()) {
            return Err(Error::Domain(format!("h must be positive and finite, got {}", cfg.h)));
        }
        if weights.len() != data.nrows() {
            return Err(Error::Dimension(format!(
                "{} weights for {} rows",
                weights.len(),
                data.nrows()
            )));
        }
        let (x, y, rows) = data.complete_case();
        let mut w = Array1::zeros(rows.len());
        for (r, &i) in rows.iter().enumerate() {
            let p = weights.probs()[i];
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::Domain(format!(
                    "completeness probability {p} at complete row {i} must be positive"
                )));
            }
            w[r] = 1.0 / p;
        }
        Ok(Self {
            xt: x.reversed_axes().as_standard_layout().into_owned(),
            y,
            w,
            h: cfg.h,
            orthogonal: cfg.condition.uses_orthogonal(),
            n_total: data.nrows(),
        })
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.xt.nrows() {
            return Err(Error::Dimension(format!(
                "{d} coefficients for {} columns",
                self.xt.nrows()
            )));
        }
        Ok(())
    }

    pub fn ncols(&self) -> usize {
        self.xt.nrows()
    }

    /// Number of rows in the original dataset, complete or not.
    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn n_complete(&self) -> usize {
        self.xt.ncols()
    }

    /// Divisor applied to raw residuals: `sqrt(1 + |omega|^2)` or 1.
    fn scale(&self, omega: ArrayView1<'_, f64>) -> f64 {
        if self.orthogonal {
            (1.0 + omega.dot(&omega)).sqrt()
        } else {
            1.0
        }
    }

    /// Raw residuals `y - X omega` over complete rows. Only nonzero
    /// coefficients are visited.
    pub fn raw_residuals(&self, omega: ArrayView1<'_, f64>) -> Array1<f64> {
        let mut e = self.y.clone();
        for (k, &w) in omega.iter().enumerate() {
            if w != 0.0 {
                e.scaled_add(-w, &self.xt.row(k));
            }
        }
        e
    }

    pub fn value(&self, omega: ArrayView1<'_, f64>) -> f64 {
        let e = self.raw_residuals(omega);
        self.value_from_residuals(omega, &e)
    }

    pub(crate) fn value_from_residuals(&self, omega: ArrayView1<'_, f64>, e: &Array1<f64>) -> f64 {
        let c = self.scale(omega);
        e.iter()
            .zip(&self.w)
            .map(|(&ei, &wi)| wi * loss_unchecked(ei / c, self.h))
            .sum()
    }

    /// Data fit after moving coordinate `k` from `from` to `to`, given the
    /// raw residuals `e` and squared norm `norm_sq` of the current
    /// coefficients.
    pub(crate) fn value_with_coordinate(&self, e: &Array1<f64>, norm_sq: f64, k: usize, from: f64, to: f64) -> f64 {
        let c = if self.orthogonal { (1.0 + norm_sq - from * from + to * to).max(1.0).sqrt() } else { 1.0 };
        let delta = to - from;
        e.iter()
            .zip(self.xt.row(k))
            .zip(&self.w)
            .map(|((&ei, &xi), &wi)| wi * loss_unchecked((ei - delta * xi) / c, self.h))
            .sum()
    }

    pub fn gradient(&self, omega: ArrayView1<'_, f64>) -> Array1<f64> {
        let e = self.raw_residuals(omega);
        self.gradient_from_residuals(omega, &e)
    }

    pub(crate) fn gradient_from_residuals(
        &self,
        omega: ArrayView1<'_, f64>,
        e: &Array1<f64>,
    ) -> Array1<f64> {
        let c = self.scale(omega);
        // dL/dr_i for each complete row, with r_i = e_i / c
        let mut g = Array1::zeros(e.len());
        let mut radial = 0.0;
        for ((gi, &ei), &wi) in g.iter_mut().zip(e).zip(&self.w) {
            let r = ei / c;
            let dl = wi * loss_grad_unchecked(r, self.h);
            *gi = dl;
            radial += dl * r;
        }
        // dr_i/dw = -t_i / c - r_i * w / c^2   (second term only when orthogonal)
        let mut grad = self.xt.dot(&g) * (-1.0 / c);
        if self.orthogonal {
            grad.scaled_add(-radial / (c * c), &omega);
        }
        grad
    }

    /// Per-row average loss on these rows; used for held-out scoring.
    pub fn mean_value(&self, omega: ArrayView1<'_, f64>) -> f64 {
        if self.n_complete() == 0 {
            return f64::NAN;
        }
        self.value(omega) / self.n_complete() as f64
    }
}
