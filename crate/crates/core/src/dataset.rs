//! Observed data: response, (possibly error-contaminated) design, and the
//! completeness pattern.
//!
//! Columns are split into an *observed block* that is never missing and a
//! *missing block* whose cells may be absent. A row is complete (`F_i = 1`)
//! when none of its missing-block cells are absent. Every missing-block cell
//! of an incomplete row is treated as absent and is never read by the
//! estimators, whatever value happens to be stored there. Cells parsed from
//! an NA token are stored as `NaN`.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficient vector over all `d` design columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Coefficients(Vec<f64>);

impl Coefficients {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("coefficient {k} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn view(&self) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.0[..])
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Euclidean norm squared.
    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    /// Sorted indices of the nonzero entries.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(k, _)| k)
            .collect()
    }
}

impl std::ops::Index<usize> for Coefficients {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    response: Array1<f64>,
    design: Array2<f64>,
    complete: Vec<bool>,
    missing_block: Vec<usize>,
    observed_block: Vec<usize>,
    response_name: String,
    column_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from an explicit completeness pattern.
    ///
    /// `missing_block` lists the columns that may be absent. Cells of those
    /// columns in incomplete rows are absent and may hold any value.
    pub fn new(
        response: Array1<f64>,
        design: Array2<f64>,
        complete: Vec<bool>,
        missing_block: &[usize],
    ) -> Result<Self> {
        let (n, d) = design.dim();
        if n == 0 || d == 0 {
            return Err(Error::InvalidData(format!(
                "design must be non-empty, got {n}x{d}"
            )));
        }
        if response.len() != n {
            return Err(Error::Dimension(format!(
                "response has {} entries, design has {n} rows",
                response.len()
            )));
        }
        if complete.len() != n {
            return Err(Error::Dimension(format!(
                "{} completeness flags for {n} rows",
                complete.len()
            )));
        }
        let missing: BTreeSet<usize> = missing_block.iter().copied().collect();
        if missing.len() != missing_block.len() {
            return Err(Error::InvalidData("duplicate missing-block column".into()));
        }
        if let Some(&k) = missing.iter().find(|&&k| k >= d) {
            return Err(Error::Dimension(format!("missing-block column {k} >= d={d}")));
        }
        if let Some(i) = response.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("response row {i} is not finite")));
        }
        let observed_block: Vec<usize> = (0..d).filter(|k| !missing.contains(k)).collect();
        for (i, row) in design.axis_iter(Axis(0)).enumerate() {
            let check: Box<dyn Iterator<Item = usize>> = if complete[i] {
                Box::new(0..d)
            } else {
                Box::new(observed_block.iter().copied())
            };
            for k in check {
                if !row[k].is_finite() {
                    return Err(Error::InvalidData(format!(
                        "row {i}, column {k} is not finite but is not absent"
                    )));
                }
            }
        }
        Ok(Self {
            response,
            design,
            complete,
            missing_block: missing.into_iter().collect(),
            observed_block,
            response_name: "y".into(),
            column_names: (1..=d).map(|k| format!("x{k}")).collect(),
        })
    }

    /// Builds a dataset whose completeness is read off the `NaN` cells of
    /// `design`: a column with any `NaN` joins the missing block and a row
    /// with any `NaN` is incomplete.
    pub fn from_raw(response: Array1<f64>, design: Array2<f64>) -> Result<Self> {
        let n = design.nrows();
        let mut complete = vec![true; n];
        let mut missing = BTreeSet::new();
        for ((i, k), v) in design.indexed_iter() {
            if v.is_nan() {
                complete[i] = false;
                missing.insert(k);
            } else if !v.is_finite() {
                return Err(Error::InvalidData(format!("row {i}, column {k} is infinite")));
            }
        }
        let missing: Vec<usize> = missing.into_iter().collect();
        Self::new(response, design, complete, &missing)
    }

    pub fn with_names(mut self, response_name: &str, column_names: Vec<String>) -> Result<Self> {
        if column_names.len() != self.ncols() {
            return Err(Error::Dimension(format!(
                "{} column names for {} columns",
                column_names.len(),
                self.ncols()
            )));
        }
        self.response_name = response_name.to_string();
        self.column_names = column_names;
        Ok(self)
    }

    pub fn nrows(&self) -> usize {
        self.design.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.design.ncols()
    }

    pub fn response(&self) -> &Array1<f64> {
        &self.response
    }

    pub fn complete_flags(&self) -> &[bool] {
        &self.complete
    }

    pub fn is_complete(&self, i: usize) -> bool {
        self.complete[i]
    }

    pub fn n_complete(&self) -> usize {
        self.complete.iter().filter(|&&c| c).count()
    }

    pub fn missing_block(&self) -> &[usize] {
        &self.missing_block
    }

    pub fn observed_block(&self) -> &[usize] {
        &self.observed_block
    }

    pub fn response_name(&self) -> &str {
        &self.response_name
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    /// Full covariate row of a complete observation.
    ///
    /// Panics if row `i` is incomplete: its missing-block cells are absent.
    pub fn complete_row(&self, i: usize) -> ArrayView1<'_, f64> {
        assert!(self.complete[i], "row {i} is incomplete; its absent cells must not be read");
        self.design.row(i)
    }

    /// Value of a cell that is known to be present.
    ///
    /// Panics when the cell is absent.
    pub fn cell(&self, i: usize, k: usize) -> f64 {
        assert!(!self.is_absent(i, k), "cell ({i}, {k}) is absent");
        self.design[[i, k]]
    }

    pub fn is_absent(&self, i: usize, k: usize) -> bool {
        !self.complete[i] && self.missing_block.binary_search(&k).is_ok()
    }

    /// Raw stored value, `NaN` for NA cells. Absent cells may hold anything;
    /// only screening and serialization look at them.
    pub fn raw(&self, i: usize, k: usize) -> f64 {
        self.design[[i, k]]
    }

    /// Mutable access to a stored cell that is absent. Used to demonstrate
    /// that estimators never depend on absent values.
    pub fn absent_cell_mut(&mut self, i: usize, k: usize) -> Option<&mut f64> {
        if self.is_absent(i, k) {
            Some(&mut self.design[[i, k]])
        } else {
            None
        }
    }

    /// Dense matrix of the complete rows only, in row order, plus the
    /// matching responses and original row indices.
    pub fn complete_case(&self) -> (Array2<f64>, Array1<f64>, Vec<usize>) {
        let rows: Vec<usize> = (0..self.nrows()).filter(|&i| self.complete[i]).collect();
        let d = self.ncols();
        let mut x = Array2::zeros((rows.len(), d));
        let mut y = Array1::zeros(rows.len());
        for (r, &i) in rows.iter().enumerate() {
            x.row_mut(r).assign(&self.complete_row(i));
            y[r] = self.response[i];
        }
        (x, y, rows)
    }

    /// Restricts to a subset of columns, recomputing the completeness
    /// pattern from the `NaN` cells that remain.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        let d = self.ncols();
        if let Some(&k) = cols.iter().find(|&&k| k >= d) {
            return Err(Error::Dimension(format!("column {k} >= d={d}")));
        }
        let design = self.design.select(Axis(1), cols);
        let names = cols.iter().map(|&k| self.column_names[k].clone()).collect();
        Self::from_raw(self.response.clone(), design)?.with_names(&self.response_name, names)
    }

    /// Restricts to a subset of rows, keeping the column blocks.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let n = self.nrows();
        if let Some(&i) = rows.iter().find(|&&i| i >= n) {
            return Err(Error::Dimension(format!("row {i} >= n={n}")));
        }
        let design = self.design.select(Axis(0), rows);
        let response = self.response.select(Axis(0), rows);
        let complete = rows.iter().map(|&i| self.complete[i]).collect();
        Self::new(response, design, complete, &self.missing_block)?
            .with_names(&self.response_name, self.column_names.clone())
    }

    /// Per-column sample variance over the present cells; used to flag
    /// degenerate columns.
    pub fn zero_variance_columns(&self) -> Vec<usize> {
        (0..self.ncols())
            .filter(|&k| {
                let vals: Vec<f64> = (0..self.nrows())
                    .filter(|&i| !self.is_absent(i, k))
                    .map(|i| self.design[[i, k]])
                    .collect();
                match vals.first() {
                    Some(&first) => vals.iter().all(|&v| v == first),
                    None => true,
                }
            })
            .collect()
    }
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        fn same(a: f64, b: f64) -> bool {
            a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())
        }
        self.response.len() == other.response.len()
            && self.design.dim() == other.design.dim()
            && self.complete == other.complete
            && self.missing_block == other.missing_block
            && self.response_name == other.response_name
            && self.column_names == other.column_names
            && self.response.iter().zip(&other.response).all(|(a, b)| same(*a, *b))
            && self.design.iter().zip(&other.design).all(|(a, b)| same(*a, *b))
    }
}
