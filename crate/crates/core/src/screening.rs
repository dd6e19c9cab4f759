//! Marginal correlation screening of covariates against the response.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Columns with fewer present cells than this are skipped.
pub const MIN_PAIRS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenedColumn {
    pub index: usize,
    pub name: String,
    pub abs_corr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningResult {
    /// Highest absolute correlation first.
    pub selected: Vec<ScreenedColumn>,
    pub subsample_size: usize,
    pub seed: u64,
    /// Drawn columns skipped for having fewer than [`MIN_PAIRS`] present
    /// cells.
    pub skipped: Vec<usize>,
}

impl ScreeningResult {
    pub fn indices(&self) -> Vec<usize> {
        self.selected.iter().map(|c| c.index).collect()
    }
}

/// Pearson correlation of `x` and `y`; zero when either is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// Absolute correlation of column `k` with the response over the rows
/// where the cell is present, or `None` when too few rows remain.
pub fn column_abs_corr(data: &Dataset, k: usize) -> Option<f64> {
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for i in 0..data.nrows() {
        let v = data.raw(i, k);
        if !data.is_absent(i, k) && !v.is_nan() {
            xs.push(v);
            ys.push(data.response()[i]);
        }
    }
    (xs.len() >= MIN_PAIRS).then(|| pearson(&xs, &ys).abs())
}

/// Draws `subsample_size` columns uniformly without replacement and keeps
/// the `k` with the largest absolute correlation with the response, ties
/// going to the lower column index.
pub fn screen_columns(data: &Dataset, k: usize, subsample_size: usize, seed: u64) -> Result<ScreeningResult> {
    let d = data.ncols();
    if !(k <= subsample_size && subsample_size <= d) {
        return Err(Error::Config(format!(
            "screening needs k <= subsample_size <= d, got {k}, {subsample_size}, {d}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drawn = sample(&mut rng, d, subsample_size).into_vec();
    let mut scored = Vec::with_capacity(drawn.len());
    let mut skipped = Vec::new();
    for idx in drawn {
        match column_abs_corr(data, idx) {
            Some(c) => scored.push((idx, c)),
            None => skipped.push(idx),
        }
    }
    skipped.sort_unstable();
    if scored.len() < k {
        return Err(Error::InvalidData(format!(
            "only {} screened columns have at least {MIN_PAIRS} present cells, {k} requested",
            scored.len()
        )));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let selected = scored
        .into_iter()
        .take(k)
        .map(|(index, abs_corr)| ScreenedColumn {
            index,
            name: data.column_names()[index].clone(),
            abs_corr,
        })
        .collect();
    Ok(ScreeningResult {
        selected,
        subsample_size,
        seed,
        skipped,
    })
}
