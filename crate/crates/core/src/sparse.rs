//! Compressed sparse row storage for feature matrices.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(n_cols: usize) -> Self {
        Self {
            n_cols,
            row_ptr: vec![0],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Appends a row. Column indices must be strictly increasing and below
    /// the column count.
    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        for (c, v) in entries {
            debug_assert!(c < self.n_cols);
            debug_assert!(
                self.col_idx.len() == *self.row_ptr.last().unwrap()
                    || *self.col_idx.last().unwrap() < c
            );
            self.col_idx.push(c);
            self.values.push(v);
        }
        self.row_ptr.push(self.col_idx.len());
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut out = Self::new(m.ncols());
        for i in 0..m.nrows() {
            out.push_row(
                (0..m.ncols())
                    .filter(|&j| m[(i, j)] != 0.0)
                    .map(|j| (j, m[(i, j)])),
            );
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows(), self.n_cols);
        for i in 0..self.n_rows() {
            let (idx, val) = self.row(i);
            for (&c, &v) in idx.iter().zip(val) {
                m[(i, c)] = v;
            }
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Widens the column count; existing entries are untouched.
    pub fn set_n_cols(&mut self, n_cols: usize) {
        assert!(self.col_idx.iter().all(|&c| c < n_cols));
        self.n_cols = n_cols;
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    pub fn row_dot(&self, i: usize, x: &DVector<f64>) -> f64 {
        let (idx, val) = self.row(i);
        idx.iter().zip(val).map(|(&c, &v)| v * x[c]).sum()
    }

    /// `out += scale * row_i`.
    pub fn add_row_scaled(&self, i: usize, scale: f64, out: &mut DVector<f64>) {
        let (idx, val) = self.row(i);
        for (&c, &v) in idx.iter().zip(val) {
            out[c] += scale * v;
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}
