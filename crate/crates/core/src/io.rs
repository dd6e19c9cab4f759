//! CSV ingestion and emission, and atomic file writes.
//!
//! Input files are UTF-8, comma separated, with a mandatory header row. One
//! column holds the response; every other column is a covariate. A cell
//! equal to one of the NA tokens is absent; a covariate column with any
//! absent cell joins the missing block and a row with any absent cell is
//! incomplete.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use tempfile::NamedTempFile;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Tokens treated as NA when the caller does not name one.
pub const DEFAULT_NA_TOKENS: [&str; 2] = ["", "NA"];

/// Token written for absent cells.
pub const NA_OUT: &str = "NA";

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(row: usize, column: &str, message: impl Into<String>) -> Error {
    Error::Csv {
        row,
        column: column.to_string(),
        message: message.into(),
    }
}

/// Reads a dataset from a CSV file. `na_token` replaces the default NA
/// tokens (empty cell or `NA`) when given.
pub fn ingest_csv(path: &Path, response_column: &str, na_token: Option<&str>) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    read_csv(file, response_column, na_token)
}

/// Like [`ingest_csv`] but from any reader. Rows in error messages are
/// one-based data rows, not counting the header.
pub fn read_csv<R: Read>(reader: R, response_column: &str, na_token: Option<&str>) -> Result<Dataset> {
    let na: Vec<&str> = match na_token {
        Some(t) => vec![t],
        None => DEFAULT_NA_TOKENS.to_vec(),
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_err(0, "", e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut seen = HashSet::new();
    if let Some(dup) = headers.iter().find(|h| !seen.insert(h.as_str())) {
        return Err(csv_err(0, dup, "duplicate header"));
    }
    let y_col = headers
        .iter()
        .position(|h| h == response_column)
        .ok_or_else(|| csv_err(0, response_column, "response column not found in header"))?;
    let x_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != y_col).collect();
    if x_cols.is_empty() {
        return Err(Error::InvalidData("no covariate columns".into()));
    }

    let mut y = Vec::new();
    let mut cells = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| csv_err(row, "", e.to_string()))?;
        let parse = |c: usize| -> Result<f64> {
            let raw = record.get(c).unwrap_or("").trim();
            if na.contains(&raw) {
                return Ok(f64::NAN);
            }
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(csv_err(row, &headers[c], format!("'{raw}' is not a finite number"))),
            }
        };
        let yv = parse(y_col)?;
        if yv.is_nan() {
            return Err(csv_err(row, response_column, "response is absent"));
        }
        y.push(yv);
        for &c in &x_cols {
            cells.push(parse(c)?);
        }
    }
    if y.is_empty() {
        return Err(Error::InvalidData("no data rows".into()));
    }
    let n = y.len();
    let design = Array2::from_shape_vec((n, x_cols.len()), cells).expect("row-major cells");
    let names = x_cols.iter().map(|&c| headers[c].clone()).collect();
    Dataset::from_raw(Array1::from(y), design)?.with_names(response_column, names)
}

/// Writes `data` as CSV: response first, then covariates, absent cells as
/// `NA`, numbers with 17 significant digits.
pub fn write_csv<W: Write>(data: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let to_err = |e: csv::Error| Error::Io {
        path: "<csv writer>".into(),
        source: e.into(),
    };
    let mut header = vec![data.response_name().to_string()];
    header.extend(data.column_names().iter().cloned());
    w.write_record(&header).map_err(to_err)?;
    let mut rec = Vec::with_capacity(data.ncols() + 1);
    for i in 0..data.nrows() {
        rec.clear();
        rec.push(format_number(data.response()[i]));
        for k in 0..data.ncols() {
            let v = data.raw(i, k);
            rec.push(if data.is_absent(i, k) || v.is_nan() {
                NA_OUT.to_string()
            } else {
                format_number(v)
            });
        }
        w.write_record(&rec).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<csv writer>".into(),
        source: e,
    })
}

/// Scientific notation with 17 significant digits; parses back to the
/// same bits.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a file by filling a temporary file in the same directory and
/// renaming it over `path`, so readers never see a partial file.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = NamedTempFile::new_in(dir).map_err(|e| io_err(path, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w)?;
        w.flush().map_err(|e| io_err(path, e))?;
    }
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

/// Atomically writes a string.
pub fn write_string_atomic(path: &Path, contents: &str) -> Result<()> {
    write_atomic(path, |w| w.write_all(contents.as_bytes()).map_err(|e| io_err(path, e)))
}

/// Atomically writes a dataset as CSV.
pub fn emit_csv(data: &Dataset, path: &Path) -> Result<()> {
    write_atomic(path, |w| write_csv(data, w))
}
