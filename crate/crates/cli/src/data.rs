//! CSV ingestion and preprocessing.

use std::path::Path;

use dcm_core::numkernel::Matrix;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

/// Numeric table with column names.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub headers: Vec<String>,
    pub data: Matrix,
}

/// Reads a headed, comma-separated file of finite numbers. Empty cells and
/// non-numeric tokens (including `NA`/`NaN`) are rejected.
pub fn read_csv(path: &Path) -> CliResult<Dataset> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    parse_csv(&bytes, path)
}

pub fn parse_csv(bytes: &[u8], path: &Path) -> CliResult<Dataset> {
    let fmt = |message: String| CliError::Format { path: path.to_path_buf(), message };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(bytes);
    let headers: Vec<String> = rdr.headers().map_err(|e| fmt(e.to_string()))?.iter().map(str::to_string).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(fmt("missing header row".into()));
    }
    let p = headers.len();
    let mut values = Vec::new();
    let mut n = 0usize;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| fmt(e.to_string()))?;
        let line = i + 2;
        if rec.len() != p {
            return Err(fmt(format!("line {line}: {} fields, expected {p}", rec.len())));
        }
        for (j, cell) in rec.iter().enumerate() {
            if cell.is_empty() {
                return Err(fmt(format!("line {line}: missing value in column '{}'", headers[j])));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| fmt(format!("line {line}: column '{}': '{cell}' is not a number", headers[j])))?;
            if !v.is_finite() {
                return Err(fmt(format!("line {line}: column '{}': non-finite value", headers[j])));
            }
            values.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(fmt("no data rows".into()));
    }
    Ok(Dataset { headers, data: Matrix::from_vec(n, p, values)? })
}

/// Column selection and scaling applied before fitting; stored with a PCA
/// model so new data is transformed identically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    /// Names of the retained columns, in order.
    pub columns: Vec<String>,
    pub excluded: Vec<String>,
    /// Per-column divisors (unnormalized MADs) when MAD scaling is on.
    pub scales: Option<Vec<f64>>,
}

impl Preprocessing {
    /// Resolves `exclude` (column names or 1-based indices) and, with
    /// `mad_scale`, computes the divisors from `ds`.
    pub fn fit(ds: &Dataset, exclude: &[String], mad_scale: bool) -> CliResult<Self> {
        let mut excluded = Vec::new();
        for e in exclude {
            let e = e.trim();
            let idx = match ds.headers.iter().position(|h| h == e) {
                Some(i) => i,
                None => match e.parse::<usize>() {
                    Ok(k) if k >= 1 && k <= ds.headers.len() => k - 1,
                    _ => return Err(CliError::validation(format!("--exclude-cols: no column '{e}'"))),
                },
            };
            if !excluded.contains(&ds.headers[idx]) {
                excluded.push(ds.headers[idx].clone());
            }
        }
        let columns: Vec<String> = ds.headers.iter().filter(|h| !excluded.contains(h)).cloned().collect();
        if columns.is_empty() {
            return Err(CliError::validation("all columns excluded"));
        }
        let mut pre = Preprocessing { columns, excluded, scales: None };
        if mad_scale {
            let sel = pre.select(ds)?;
            let mut scales = Vec::with_capacity(sel.ncols());
            for (j, name) in pre.columns.iter().enumerate() {
                let m = dcm_core::mad(&sel.column(j));
                if !(m > 0.0) {
                    return Err(CliError::validation(format!(
                        "column '{name}' has MAD = 0 and cannot be MAD-scaled; exclude it with --exclude-cols"
                    )));
                }
                scales.push(m);
            }
            pre.scales = Some(scales);
        }
        Ok(pre)
    }

    fn select(&self, ds: &Dataset) -> CliResult<Matrix> {
        let idx: Vec<usize> = self
            .columns
            .iter()
            .map(|c| {
                ds.headers
                    .iter()
                    .position(|h| h == c)
                    .ok_or_else(|| CliError::validation(format!("input has no column '{c}'")))
            })
            .collect::<CliResult<_>>()?;
        Ok(ds.data.map_rows(|r| idx.iter().map(|&j| r[j]).collect()))
    }

    /// Selected and scaled data matrix.
    pub fn apply(&self, ds: &Dataset) -> CliResult<Matrix> {
        let m = self.select(ds)?;
        Ok(match &self.scales {
            Some(s) => m.map_rows(|r| r.iter().zip(s).map(|(x, d)| x / d).collect()),
            None => m,
        })
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV text from a header and rows of already formatted cells.
pub fn csv_text(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}
