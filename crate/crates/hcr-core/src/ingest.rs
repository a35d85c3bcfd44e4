//! Loading paired data samples from delimited text files.

use std::path::Path;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Input table format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Tsv,
}

impl TableFormat {
    fn delimiter(self) -> u8 {
        match self {
            TableFormat::Csv => b',',
            TableFormat::Tsv => b'\t',
        }
    }

    /// Guess the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("tab") => TableFormat::Tsv,
            _ => TableFormat::Csv,
        }
    }
}

/// An n x d matrix of raw observations for one variable group.
///
/// Rows are observations, columns are coordinates. Construction validates
/// n >= 2, d >= 1 and that every entry is finite; the matrix is immutable
/// afterwards and safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix<T> {
    values: Array2<T>,
    column_names: Option<Vec<String>>,
}

impl<T: Real> SampleMatrix<T> {
    pub fn new(values: Array2<T>, column_names: Option<Vec<String>>) -> Result<Self> {
        let (n, d) = values.dim();
        if n < 2 {
            return Err(Error::SampleTooSmall { n, min: 2 });
        }
        if d < 1 {
            return Err(Error::Config("sample must have at least one column".into()));
        }
        if let Some(names) = &column_names {
            if names.len() != d {
                return Err(Error::Dim { expected: d, got: names.len() });
            }
        }
        for ((i, j), v) in values.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
        Ok(Self { values, column_names })
    }

    /// Build from row-major nested vectors; convenient in tests.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.len());
        let mut flat = Vec::with_capacity(n * d);
        for r in rows {
            if r.len() != d {
                return Err(Error::Dim { expected: d, got: r.len() });
            }
            flat.extend_from_slice(r);
        }
        let values = Array2::from_shape_vec((n, d), flat)
            .map_err(|e| Error::Config(e.to_string()))?;
        Self::new(values, None)
    }

    /// Single-column sample.
    pub fn from_column(column: &[T]) -> Result<Self> {
        let values = Array2::from_shape_vec((column.len(), 1), column.to_vec())
            .map_err(|e| Error::Config(e.to_string()))?;
        Self::new(values, None)
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, T> {
        self.values.column(j)
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }
}

/// Two samples whose rows are paired observations.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample<T> {
    pub x: SampleMatrix<T>,
    pub y: SampleMatrix<T>,
}

impl<T: Real> PairedSample<T> {
    pub fn new(x: SampleMatrix<T>, y: SampleMatrix<T>) -> Result<Self> {
        if x.n_rows() != y.n_rows() {
            return Err(Error::Pairing { x_rows: x.n_rows(), y_rows: y.n_rows() });
        }
        Ok(Self { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.n_rows()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.x.n_cols(), self.y.n_cols())
    }
}

/// Raw parse result: data rows plus an optional header.
struct ParsedTable<T> {
    values: Array2<T>,
    header: Option<Vec<String>>,
}

/// Parse a delimited file. A single leading header row is auto-detected by a
/// non-numeric first line; missing or non-finite cells are rejected.
fn parse_table<T: Real>(path: &Path, format: TableFormat) -> Result<ParsedTable<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(format.delimiter())
        .trim(csv::Trim::All)
        .from_path(path)?;

    let mut records: Vec<csv::StringRecord> = Vec::new();
    for rec in reader.records() {
        records.push(rec?);
    }
    if records.is_empty() {
        return Err(Error::Config(format!("{}: file contains no rows", path.display())));
    }

    let first_is_header = records[0]
        .iter()
        .any(|cell| cell.parse::<f64>().is_err());
    let header = if first_is_header {
        Some(records[0].iter().map(str::to_owned).collect())
    } else {
        None
    };
    let start = usize::from(first_is_header);
    let data = &records[start..];
    if data.is_empty() {
        return Err(Error::Config(format!("{}: no data rows after header", path.display())));
    }

    let d = data[0].len();
    let n = data.len();
    let mut flat = Vec::with_capacity(n * d);
    for (i, rec) in data.iter().enumerate() {
        let row = i + start;
        if rec.len() != d {
            return Err(Error::Dim { expected: d, got: rec.len() });
        }
        for (j, cell) in rec.iter().enumerate() {
            let parsed: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                col: j,
                text: cell.to_owned(),
            })?;
            if !parsed.is_finite() {
                return Err(Error::NonFinite { row, col: j });
            }
            flat.push(T::of(parsed));
        }
    }
    let values = Array2::from_shape_vec((n, d), flat)
        .map_err(|e| Error::Config(e.to_string()))?;
    Ok(ParsedTable { values, header })
}

/// Load two files with equal row counts into a paired sample.
pub fn load_paired<T: Real>(
    path_x: &Path,
    path_y: &Path,
    format: TableFormat,
) -> Result<PairedSample<T>> {
    let tx = parse_table(path_x, format)?;
    let ty = parse_table(path_y, format)?;
    if tx.values.nrows() != ty.values.nrows() {
        return Err(Error::Pairing { x_rows: tx.values.nrows(), y_rows: ty.values.nrows() });
    }
    let x = SampleMatrix::new(tx.values, tx.header)?;
    let y = SampleMatrix::new(ty.values, ty.header)?;
    PairedSample::new(x, y)
}

/// Load one file and split its columns: [0, split) become x, [split, d) become y.
pub fn load_joint<T: Real>(
    path: &Path,
    format: TableFormat,
    split: usize,
) -> Result<PairedSample<T>> {
    let table = parse_table::<T>(path, format)?;
    let d = table.values.ncols();
    if split < 1 || split >= d {
        return Err(Error::Config(format!(
            "split column {split} outside 1..{d}"
        )));
    }
    let x_vals = table.values.slice(ndarray::s![.., ..split]).to_owned();
    let y_vals = table.values.slice(ndarray::s![.., split..]).to_owned();
    let (x_names, y_names) = match table.header {
        Some(h) => (Some(h[..split].to_vec()), Some(h[split..].to_vec())),
        None => (None, None),
    };
    let x = SampleMatrix::new(x_vals, x_names)?;
    let y = SampleMatrix::new(y_vals, y_names)?;
    PairedSample::new(x, y)
}
