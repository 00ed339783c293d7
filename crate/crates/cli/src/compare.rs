//! Row-by-row comparison of two coverage CSV files.

use std::path::Path;

use crate::CliError;

/// Columns that hold values; every other column is part of the row key.
const VALUE_COLUMNS: &[&str] = &["p_c_analytic", "p_c_mc", "mc_stderr", "status"];
const COMPARED: &[&str] = &["p_c_analytic", "p_c_mc"];
/// Relative tolerance when matching key columns.
const KEY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct RowDiff {
    pub row: usize,
    pub key: Vec<f64>,
    pub diff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub key_columns: Vec<String>,
    /// Column compared in each file.
    pub columns: (String, String),
    pub rows: Vec<RowDiff>,
    pub max_diff: f64,
    pub tolerance: f64,
}

impl CompareReport {
    pub fn passed(&self) -> bool {
        self.max_diff <= self.tolerance
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "comparing {} against {} over {} rows\n",
            self.columns.0,
            self.columns.1,
            self.rows.len()
        );
        for r in &self.rows {
            let key: Vec<String> = self
                .key_columns
                .iter()
                .zip(&r.key)
                .map(|(c, v)| format!("{c}={v}"))
                .collect();
            out.push_str(&format!("row {:>4}  {:<32} |diff| = {:.3e}\n", r.row + 1, key.join(" "), r.diff));
        }
        out.push_str(&format!(
            "max |diff| = {:.3e}, tolerance = {:.3e}: {}\n",
            self.max_diff,
            self.tolerance,
            if self.passed() { "PASS" } else { "FAIL" }
        ));
        out
    }
}

struct Table {
    keys: Vec<String>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Self, CliError> {
        let err = |e: csv::Error| CliError::Validation(format!("{}: {e}", path.display()));
        let mut r = csv::Reader::from_path(path).map_err(err)?;
        let header: Vec<String> = r.headers().map_err(err)?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<Result<Vec<Vec<String>>, _>>()
            .map_err(err)?;
        let keys = header
            .iter()
            .filter(|h| !VALUE_COLUMNS.contains(&h.as_str()))
            .cloned()
            .collect();
        Ok(Self { keys, header, rows })
    }

    fn index(&self, column: &str) -> Option<usize> {
        self.header.iter().position(|h| h == column)
    }

    fn number(&self, row: usize, col: usize, path: &Path) -> Result<f64, CliError> {
        let cell = &self.rows[row][col];
        cell.trim().parse().map_err(|_| {
            CliError::Validation(format!(
                "{}: row {} column {} is not a number: '{cell}'",
                path.display(),
                row + 1,
                self.header[col]
            ))
        })
    }
}

pub fn compare(a: &Path, b: &Path, tolerance: f64) -> Result<CompareReport, CliError> {
    if !(tolerance.is_finite() && tolerance >= 0.0) {
        return Err(CliError::Validation(format!("tolerance must be >= 0, got {tolerance}")));
    }
    let ta = Table::read(a)?;
    let tb = Table::read(b)?;
    if ta.keys != tb.keys {
        return Err(CliError::Validation(format!(
            "grid columns differ: {:?} vs {:?}",
            ta.keys, tb.keys
        )));
    }
    let shared: Vec<&str> = COMPARED
        .iter()
        .copied()
        .filter(|c| ta.index(c).is_some() && tb.index(c).is_some())
        .collect();
    let first = |t: &Table| COMPARED.iter().copied().find(|c| t.index(c).is_some());
    let (ca, cb) = match shared.first() {
        Some(c) => (*c, *c),
        None => match (first(&ta), first(&tb)) {
            (Some(x), Some(y)) => (x, y),
            _ => {
                return Err(CliError::Validation(
                    "no coverage column (p_c_analytic or p_c_mc) in one of the files".into(),
                ))
            }
        },
    };

    let mut mismatched = Vec::new();
    if ta.rows.len() != tb.rows.len() {
        mismatched.push(format!("row counts differ: {} vs {}", ta.rows.len(), tb.rows.len()));
    }
    let mut rows = Vec::new();
    for i in 0..ta.rows.len().min(tb.rows.len()) {
        let mut key = Vec::new();
        let mut same = true;
        for k in &ta.keys {
            let x = ta.number(i, ta.index(k).expect("key from header"), a)?;
            let y = tb.number(i, tb.index(k).expect("same keys"), b)?;
            same &= (x - y).abs() <= KEY_TOLERANCE * x.abs().max(y.abs()).max(1.0);
            key.push(x);
        }
        if !same {
            mismatched.push(format!("row {}", i + 1));
            continue;
        }
        let x = ta.number(i, ta.index(ca).expect("chosen from header"), a)?;
        let y = tb.number(i, tb.index(cb).expect("chosen from header"), b)?;
        rows.push(RowDiff { row: i, key, diff: (x - y).abs() });
    }
    if !mismatched.is_empty() {
        return Err(CliError::Validation(format!(
            "threshold grids do not match: {}",
            mismatched.join(", ")
        )));
    }
    // NaN differences count as failures
    let max_diff = rows
        .iter()
        .map(|r| if r.diff.is_nan() { f64::INFINITY } else { r.diff })
        .fold(0.0, f64::max);
    Ok(CompareReport {
        key_columns: ta.keys.clone(),
        columns: (ca.to_string(), cb.to_string()),
        rows,
        max_diff,
        tolerance,
    })
}
