//! Synthetic stand-in for a wide gene-expression table: few rows, many
//! log-ratio columns with gene-like identifiers, a handful of informative
//! columns, additive measurement error and NA cells.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub rows: usize,
    pub cols: usize,
    /// Number of columns that drive the response.
    pub informative: usize,
    /// Number of columns that contain NA cells.
    pub na_columns: usize,
    /// Probability that a cell of an NA column is missing.
    pub na_rate: f64,
    /// Standard deviation of the additive measurement error.
    pub me_sd: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            rows: 98,
            cols: 2000,
            informative: 5,
            na_columns: 3,
            na_rate: 0.1,
            me_sd: 0.05,
            seed: 2002,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rows < 3 || self.cols == 0 {
            return Err(Error::Config("synth needs at least 3 rows and 1 column".into()));
        }
        if self.informative + self.na_columns > self.cols {
            return Err(Error::Config("informative + na_columns exceeds cols".into()));
        }
        if !(0.0..1.0).contains(&self.na_rate) || !(self.me_sd >= 0.0) {
            return Err(Error::Config("na_rate must be in [0, 1) and me_sd >= 0".into()));
        }
        Ok(())
    }
}

/// Generated table plus the informative columns, for checking recovery.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub dataset: Dataset,
    pub informative: Vec<usize>,
}

fn gene_names<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut names = Vec::with_capacity(count);
    while names.len() < count {
        let name = match rng.random_range(0..3) {
            0 => format!("Contig{}_RC", rng.random_range(10_000..70_000)),
            1 => format!("NM_{:06}", rng.random_range(1_000..30_000)),
            _ => format!("A{}{:06}", ['B', 'F', 'J'][rng.random_range(0..3)], rng.random_range(1..100_000)),
        };
        if seen.insert(name.clone()) {
            names.push(name);
        }
    }
    names
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (n, d) = (cfg.rows, cfg.cols);
    let names = gene_names(d, &mut rng);

    // log10 ratios cluster tightly around zero
    let x = Array2::from_shape_fn((n, d), |_| 0.2 * rng.sample::<f64, _>(StandardNormal));
    let picks = sample(&mut rng, d, cfg.informative + cfg.na_columns).into_vec();
    let mut informative = picks[..cfg.informative].to_vec();
    informative.sort_unstable();
    let na_cols = &picks[cfg.informative..];

    let mut y = Array1::zeros(n);
    for (j, &k) in informative.iter().enumerate() {
        let coef = if j % 2 == 0 { 6.0 } else { -4.0 };
        y.scaled_add(coef, &x.column(k));
    }
    let noise = Normal::new(0.0, 1.0).expect("valid");
    y.mapv_inplace(|v| v + noise.sample(&mut rng));

    let mut t = x;
    if cfg.me_sd > 0.0 {
        let me = Normal::new(0.0, cfg.me_sd).map_err(|e| Error::Config(e.to_string()))?;
        t.mapv_inplace(|v| v + me.sample(&mut rng));
    }
    for &k in na_cols {
        for i in 0..n {
            if rng.random::<f64>() < cfg.na_rate {
                t[[i, k]] = f64::NAN;
            }
        }
    }
    let dataset = Dataset::from_raw(y, t)?.with_names("dfs_time", names)?;
    Ok(SynthData { dataset, informative })
}
