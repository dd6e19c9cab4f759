//! Nadaraya-Watson estimates of the probability that a row is complete.
//!
//! The conditioning vector for row `i` is `s_i = (y_i, t_i[observed block])`.
//! With a Gaussian product kernel `K` and bandwidth `l`,
//!
//! ```text
//! pi_i = sum_j F_j K((s_i - s_j) / l) / sum_j K((s_i - s_j) / l)
//! ```
//!
//! where the sums include `j = i`. Estimates below `clip_floor` are raised
//! to it.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

pub const DEFAULT_CLIP_FLOOR: f64 = 0.05;

/// Estimated completeness probabilities, one per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityWeights {
    probs: Vec<f64>,
    bandwidth: f64,
    clip_floor: f64,
    /// Rows whose raw estimate was raised to `clip_floor`.
    clipped: Vec<usize>,
}

impl PropensityWeights {
    /// Weight 1 for every row; used when missingness is not corrected.
    pub fn unit(n: usize) -> Self {
        Self {
            probs: vec![1.0; n],
            bandwidth: f64::INFINITY,
            clip_floor: f64::MIN_POSITIVE,
            clipped: Vec::new(),
        }
    }

    /// Wraps externally supplied probabilities. Each must lie in (0, 1].
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| !(**p > 0.0 && **p <= 1.0)) {
            return Err(Error::Domain(format!("probability {p} at row {i} is outside (0, 1]")));
        }
        let floor = probs.iter().copied().fold(1.0, f64::min);
        Ok(Self {
            probs,
            bandwidth: f64::INFINITY,
            clip_floor: floor,
            clipped: Vec::new(),
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn clip_floor(&self) -> f64 {
        self.clip_floor
    }

    pub fn clipped_rows(&self) -> &[usize] {
        &self.clipped
    }

    /// Restricts to a subset of rows, preserving order.
    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            probs: rows.iter().map(|&i| self.probs[i]).collect(),
            bandwidth: self.bandwidth,
            clip_floor: self.clip_floor,
            clipped: rows
                .iter()
                .enumerate()
                .filter(|(_, i)| self.clipped.binary_search(i).is_ok())
                .map(|(r, _)| r)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelFamily {
    GaussianProduct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelSpec {
    /// Length of the conditioning vector, `m + 1`.
    pub dimension: usize,
    pub family: KernelFamily,
    /// Scale each conditioning coordinate to unit sample standard deviation
    /// before evaluating the kernel.
    pub standardize: bool,
}

impl KernelSpec {
    pub fn for_dataset(data: &Dataset) -> Self {
        Self {
            dimension: data.observed_block().len() + 1,
            family: KernelFamily::GaussianProduct,
            standardize: true,
        }
    }
}

/// Product of standard normal densities, `(2 pi)^{-k/2} exp(-|u|^2 / 2)`.
pub fn gaussian_product_kernel(u: &[f64]) -> Result<f64> {
    if u.is_empty() {
        return Err(Error::Domain("kernel argument is empty".into()));
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("kernel argument is not finite".into()));
    }
    let sq: f64 = u.iter().map(|v| v * v).sum();
    Ok((2.0 * PI).powf(-(u.len() as f64) / 2.0) * (-sq / 2.0).exp())
}

/// `sigma * n^{-1/(m+2)}`.
pub fn bandwidth_rule(sigma: f64, n: usize, m: usize) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    Ok(sigma * (n as f64).powf(-1.0 / (m as f64 + 2.0)))
}

/// Conditioning matrix with rows `s_i = (y_i, t_i[observed block])`.
pub fn conditioning_matrix(data: &Dataset) -> Array2<f64> {
    let obs = data.observed_block();
    let mut s = Array2::zeros((data.nrows(), obs.len() + 1));
    for (i, mut row) in s.axis_iter_mut(Axis(0)).enumerate() {
        row[0] = data.response()[i];
        for (c, &k) in obs.iter().enumerate() {
            row[c + 1] = data.cell(i, k);
        }
    }
    s
}

/// Scales each column to unit sample standard deviation. Constant columns
/// are left as is.
pub fn standardize_columns(s: &mut Array2<f64>) {
    let n = s.nrows();
    if n < 2 {
        return;
    }
    for mut col in s.axis_iter_mut(Axis(1)) {
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        if sd > 0.0 && sd.is_finite() {
            col.mapv_inplace(|v| v / sd);
        }
    }
}

/// Unclipped kernel-weighted average of `flags` at every row of `s`.
///
/// The kernel's normalizing constant cancels, so only
/// `exp(-|s_i - s_j|^2 / (2 l^2))` is evaluated, shifted by the row maximum
/// of the exponent.
pub fn kernel_ratio(s: ArrayView2<'_, f64>, flags: &[bool], l: f64) -> Result<Array1<f64>> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::Domain(format!("bandwidth must be positive, got {l}")));
    }
    let n = s.nrows();
    if flags.len() != n {
        return Err(Error::Dimension(format!("{} flags for {n} rows", flags.len())));
    }
    if !flags.iter().any(|&f| f) {
        return Err(Error::NoCompleteObservations);
    }
    let inv = 1.0 / (2.0 * l * l);
    let mut out = Array1::zeros(n);
    let mut expo = vec![0.0; n];
    for i in 0..n {
        let si = s.row(i);
        let mut max_e = f64::NEG_INFINITY;
        for (j, e) in expo.iter_mut().enumerate() {
            let sj = s.row(j);
            let sq: f64 = si.iter().zip(sj.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            *e = -sq * inv;
            max_e = max_e.max(*e);
        }
        let (mut num, mut den) = (0.0, 0.0);
        for (j, &e) in expo.iter().enumerate() {
            let k = (e - max_e).exp();
            den += k;
            if flags[j] {
                num += k;
            }
        }
        out[i] = num / den;
    }
    Ok(out)
}

/// Estimates completeness probabilities for every row of `data` at
/// bandwidth `l`.
pub fn estimate_propensity(
    data: &Dataset,
    spec: &KernelSpec,
    l: f64,
    clip_floor: f64,
) -> Result<PropensityWeights> {
    if !(clip_floor > 0.0 && clip_floor < 1.0) {
        return Err(Error::Config(format!("clip_floor must lie in (0, 1), got {clip_floor}")));
    }
    let mut s = conditioning_matrix(data);
    if spec.dimension != s.ncols() {
        return Err(Error::Dimension(format!(
            "kernel dimension {} but conditioning vector has {} entries",
            spec.dimension,
            s.ncols()
        )));
    }
    if spec.standardize {
        standardize_columns(&mut s);
    }
    let raw = kernel_ratio(s.view(), data.complete_flags(), l)?;
    let mut clipped = Vec::new();
    let probs = raw
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if p < clip_floor {
                clipped.push(i);
                clip_floor
            } else {
                p.min(1.0)
            }
        })
        .collect();
    Ok(PropensityWeights {
        probs,
        bandwidth: l,
        clip_floor,
        clipped,
    })
}

/// Standardized conditioning variables with the plug-in bandwidth
/// `n^{-1/(m+2)}`.
pub fn estimate_propensity_default(data: &Dataset, clip_floor: f64) -> Result<PropensityWeights> {
    let spec = KernelSpec::for_dataset(data);
    let l = bandwidth_rule(1.0, data.nrows(), spec.dimension - 1)?;
    estimate_propensity(data, &spec, l, clip_floor)
}
