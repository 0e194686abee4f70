//! Observation sets and their CSV form.
//!
//! File layout: a header line `# dim=<p> n=<n> seed=<seed>` followed by one
//! sample per row, `p` comma-separated reals. The `seed` field is optional on
//! read.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `n` nonzero real vectors of dimension `p`, stored as the columns of a
/// `p x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    data: DMatrix<f64>,
}

impl SampleSet {
    /// Builds a sample set from the columns of `data`.
    pub fn from_columns(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::InvalidInput(
                "samples must have dimension >= 1".into(),
            ));
        }
        if data.ncols() == 0 {
            return Err(Error::InvalidInput("sample set must be non-empty".into()));
        }
        for (i, col) in data.column_iter().enumerate() {
            if col.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidSample(format!(
                    "sample {i} has non-finite entries"
                )));
            }
            if col.iter().all(|&x| x == 0.0) {
                return Err(Error::InvalidSample(format!(
                    "sample {i} is the zero vector"
                )));
            }
        }
        Ok(SampleSet { data })
    }

    pub fn from_vectors(vectors: &[Vec<f64>]) -> Result<Self> {
        let p = vectors.first().map_or(0, Vec::len);
        if let Some(bad) = vectors.iter().find(|v| v.len() != p) {
            return Err(Error::dim(p, bad.len()));
        }
        let data = DMatrix::from_fn(p, vectors.len(), |r, c| vectors[c][r]);
        Self::from_columns(data)
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    /// The `p x n` data matrix, one sample per column.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn sample(&self, i: usize) -> DVector<f64> {
        self.data.column(i).into_owned()
    }

    pub fn iter(&self) -> impl Iterator<Item = DVector<f64>> + '_ {
        self.data.column_iter().map(|c| c.into_owned())
    }

    /// Returns a copy with sample `i` multiplied by `c`.
    pub fn with_scaled_sample(&self, i: usize, c: f64) -> Result<Self> {
        if i >= self.len() {
            return Err(Error::InvalidInput(format!(
                "sample index {i} out of range"
            )));
        }
        let mut data = self.data.clone();
        data.column_mut(i).scale_mut(c);
        Self::from_columns(data)
    }

    pub fn to_csv_string(&self, seed: Option<u64>) -> String {
        let mut out = format!("# dim={} n={}", self.dim(), self.len());
        if let Some(s) = seed {
            let _ = write!(out, " seed={s}");
        }
        out.push('\n');
        for col in self.data.column_iter() {
            let row: Vec<String> = col.iter().map(|x| fmt_f64(*x)).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<(Self, Option<u64>)> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty sample file".into()))?;
        let header = header
            .strip_prefix('#')
            .ok_or_else(|| Error::Parse(format!("expected `# dim=...` header, got {header:?}")))?;
        let mut dim = None;
        let mut n = None;
        let mut seed = None;
        for field in header.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("malformed header field {field:?}")))?;
            let parse = |v: &str| {
                v.parse::<u64>()
                    .map_err(|_| Error::Parse(format!("bad header value {key}={v}")))
            };
            match key {
                "dim" => dim = Some(parse(value)? as usize),
                "n" => n = Some(parse(value)? as usize),
                "seed" => seed = Some(parse(value)?),
                _ => return Err(Error::Parse(format!("unknown header field {key:?}"))),
            }
        }
        let dim = dim.ok_or_else(|| Error::Parse("header lacks dim=".into()))?;

        let mut vectors = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("row {}: bad number {v:?}", lineno + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != dim {
                return Err(Error::dim(dim, row.len()));
            }
            vectors.push(row);
        }
        if let Some(n) = n {
            if n != vectors.len() {
                return Err(Error::Parse(format!(
                    "header declares n={n} but file has {} rows",
                    vectors.len()
                )));
            }
        }
        Ok((Self::from_vectors(&vectors)?, seed))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, seed: Option<u64>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv_string(seed)).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<(Self, Option<u64>)> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text)
    }
}

/// 17 significant digits; parses back to the identical `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Matrix as CSV rows with 17 significant digits.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|x| fmt_f64(*x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
