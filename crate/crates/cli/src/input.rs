//! CSV ingestion: a header row, feature columns, then the response `y`.

use std::path::Path;

use gdantzig::Dataset;
use nalgebra::{DMatrix, DVector};

use crate::error::{io_error, usage, Failure};

pub struct Table {
    pub features: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

pub fn read_table(path: &Path) -> Result<Table, Failure> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| io_error(path, e))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| io_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < 2 {
        return usage(format!("{}: need at least one feature column and y", path.display()));
    }
    if header.last().map(String::as_str) != Some("y") {
        return usage(format!("{}: the last column must be named y", path.display()));
    }
    let m = header.len() - 1;
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| io_error(path, e))?;
        let line = i + 2;
        for (j, field) in rec.iter().enumerate() {
            if field.is_empty() {
                return usage(format!("{}: line {line}: missing value in column {}", path.display(), header[j]));
            }
            let v: f64 = field.parse().map_err(|_| {
                Failure::Usage(format!("{}: line {line}: cannot parse {field:?} in column {}", path.display(), header[j]))
            })?;
            if !v.is_finite() {
                return usage(format!("{}: line {line}: non-finite value in column {}", path.display(), header[j]));
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return usage(format!("{}: no data rows", path.display()));
    }
    let all = DMatrix::from_row_slice(rows, m + 1, &values);
    Ok(Table {
        features: header[..m].to_vec(),
        x: all.columns(0, m).into_owned(),
        y: all.column(m).into_owned(),
    })
}

/// Reads the CSV and rescales its columns to unit empirical norm.
pub fn read_normalized(path: &Path) -> Result<(Table, Dataset), Failure> {
    let t = read_table(path)?;
    let ds = Dataset::with_tight_bound(t.x.clone(), t.y.clone())?.normalize_columns()?;
    Ok((t, ds))
}
