//! LIBSVM-format datasets and the preprocessing applied before training.
//!
//! Lines look like `<label> <idx>:<val> <idx>:<val> ...` with 1-based,
//! strictly increasing indices. Text after `#` is ignored, as are blank
//! lines. Indices are stored 0-based.

use std::fmt::Write as _;
use std::io::BufRead;

use thiserror::Error;

use crate::objectives::{LogisticError, LogisticProblem};
use crate::sparse::CsrMatrix;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}, column {column}: {message}")]
    MalformedLine {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: index {index} does not increase")]
    NonMonotoneIndex { line: usize, index: usize },
    #[error("input contains no data rows")]
    EmptyFile,
    #[error("label {0} has no mapping")]
    UnmappedLabel(f64),
    #[error("no rows match the requested classes")]
    EmptyResult,
    #[error("feature dimension {requested} is below the largest index {seen}")]
    DimensionTooSmall { requested: usize, seen: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Logistic(#[from] LogisticError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: CsrMatrix,
    pub labels: Vec<f64>,
    /// Largest 1-based feature index present in the input.
    pub n_declared: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleRange {
    /// `[0, 1]`
    Unit,
    /// `[-1, 1]`
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleMode {
    /// Min/max per feature column.
    Column,
    /// One min/max over the whole matrix (pixel data).
    Global,
}

/// Column where a whitespace-separated token starts, 1-based.
fn column_of(line: &str, token: &str) -> usize {
    token.as_ptr() as usize - line.as_ptr() as usize + 1
}

pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<Dataset, IngestError> {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut n_declared = 0;
    for (lineno, line) in reader.lines().enumerate() {
        let raw = line?;
        let line_no = lineno + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let malformed = |tok: &str, message: String| IngestError::MalformedLine {
            line: line_no,
            column: column_of(&raw, tok),
            message,
        };
        let label: f64 = label_tok
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| malformed(label_tok, format!("bad label {label_tok:?}")))?;
        let mut entries = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| malformed(tok, format!("expected idx:val, found {tok:?}")))?;
            let index: usize = idx
                .parse()
                .ok()
                .filter(|&i| i >= 1)
                .ok_or_else(|| malformed(tok, format!("bad index {idx:?}")))?;
            let value: f64 = val
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| malformed(tok, format!("bad value {val:?}")))?;
            if index <= last {
                return Err(IngestError::NonMonotoneIndex {
                    line: line_no,
                    index,
                });
            }
            last = index;
            entries.push((index - 1, value));
        }
        n_declared = n_declared.max(last);
        labels.push(label);
        rows.push(entries);
    }
    if rows.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    let mut features = CsrMatrix::new(n_declared);
    for row in rows {
        features.push_row(row);
    }
    Ok(Dataset {
        features,
        labels,
        n_declared,
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.n_cols()
    }

    /// Fixes the feature dimension, e.g. when trailing columns are all zero.
    pub fn with_dim(mut self, n: usize) -> Result<Self, IngestError> {
        if n < self.n_declared {
            return Err(IngestError::DimensionTooSmall {
                requested: n,
                seen: self.n_declared,
            });
        }
        self.features.set_n_cols(n);
        Ok(self)
    }

    /// LIBSVM text with 1-based indices; values use the shortest
    /// representation that parses back to the same `f64`.
    pub fn to_libsvm(&self) -> String {
        let mut out = String::new();
        for (i, label) in self.labels.iter().enumerate() {
            let _ = write!(out, "{label}");
            let (idx, val) = self.features.row(i);
            for (c, v) in idx.iter().zip(val) {
                let _ = write!(out, " {}:{}", c + 1, v);
            }
            out.push('\n');
        }
        out
    }

    /// Replaces every label through `map`; an unmapped label is an error.
    pub fn remap_labels(mut self, map: &[(f64, f64)]) -> Result<Self, IngestError> {
        for y in &mut self.labels {
            *y = map
                .iter()
                .find(|(raw, _)| raw == y)
                .map(|&(_, to)| to)
                .ok_or(IngestError::UnmappedLabel(*y))?;
        }
        Ok(self)
    }

    /// Keeps rows whose label is in `keep`, in their original order.
    pub fn filter_classes(&self, keep: &[f64]) -> Result<Self, IngestError> {
        let mut features = CsrMatrix::new(self.dim());
        let mut labels = Vec::new();
        for (i, y) in self.labels.iter().enumerate() {
            if keep.contains(y) {
                let (idx, val) = self.features.row(i);
                features.push_row(idx.iter().copied().zip(val.iter().copied()));
                labels.push(*y);
            }
        }
        if labels.is_empty() {
            return Err(IngestError::EmptyResult);
        }
        Ok(Self {
            features,
            labels,
            n_declared: self.n_declared,
        })
    }

    /// Min-max scaling onto `range`. Absent entries count as zeros when
    /// taking the min and max; a column whose zero maps to a nonzero value is
    /// materialized. Constant columns go to the midpoint of the range.
    pub fn scale_features(&self, range: ScaleRange, mode: ScaleMode) -> Self {
        let n = self.dim();
        let rows = self.len();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        let mut stored = vec![0usize; n];
        for i in 0..rows {
            let (idx, val) = self.features.row(i);
            for (&c, &v) in idx.iter().zip(val) {
                lo[c] = lo[c].min(v);
                hi[c] = hi[c].max(v);
                stored[c] += 1;
            }
        }
        for c in 0..n {
            if stored[c] < rows {
                lo[c] = lo[c].min(0.0);
                hi[c] = hi[c].max(0.0);
            }
        }
        if mode == ScaleMode::Global {
            let glo = lo.iter().cloned().fold(f64::INFINITY, f64::min);
            let ghi = hi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            lo.iter_mut().for_each(|v| *v = glo);
            hi.iter_mut().for_each(|v| *v = ghi);
        }
        let (t_lo, t_hi) = match range {
            ScaleRange::Unit => (0.0, 1.0),
            ScaleRange::Symmetric => (-1.0, 1.0),
        };
        let map = |c: usize, v: f64| -> f64 {
            if hi[c] > lo[c] {
                t_lo + (t_hi - t_lo) * (v - lo[c]) / (hi[c] - lo[c])
            } else {
                0.5 * (t_lo + t_hi)
            }
        };
        let dense_cols: Vec<usize> = (0..n).filter(|&c| map(c, 0.0) != 0.0).collect();

        let mut features = CsrMatrix::new(n);
        for i in 0..rows {
            let (idx, val) = self.features.row(i);
            let mut entries = Vec::with_capacity(idx.len() + dense_cols.len());
            let mut dense = dense_cols.iter().peekable();
            for (&c, &v) in idx.iter().zip(val) {
                while let Some(&&d) = dense.peek() {
                    if d >= c {
                        break;
                    }
                    entries.push((d, map(d, 0.0)));
                    dense.next();
                }
                if dense.peek() == Some(&&c) {
                    dense.next();
                }
                entries.push((c, map(c, v)));
            }
            entries.extend(dense.map(|&d| (d, map(d, 0.0))));
            features.push_row(entries);
        }
        Self {
            features,
            labels: self.labels.clone(),
            n_declared: self.n_declared,
        }
    }

    pub fn into_logistic(self) -> Result<LogisticProblem, IngestError> {
        Ok(LogisticProblem::new(self.features, self.labels)?)
    }
}

/// Parses a label map written as `raw:mapped,raw:mapped`, e.g. `1:1,2:-1`.
pub fn parse_label_map(text: &str) -> Option<Vec<(f64, f64)>> {
    text.split(',')
        .map(|pair| {
            let (a, b) = pair.split_once(':')?;
            Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
        })
        .collect()
}
