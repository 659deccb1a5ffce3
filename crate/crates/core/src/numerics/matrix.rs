//! Dense row-major `f64` matrices.
//!
//! Every product here sums in ascending index order with no reassociation, so
//! results are bit-reproducible across runs and platforms.

use std::fmt;

use crate::error::{Result, SppError};
use crate::numerics::alloc_track;

/// Dense 2-D `f64` matrix, stored row-major.
///
/// Constructors that take caller data reject non-finite values. Arithmetic can
/// still overflow; callers that care check [`Matrix::is_all_finite`].
#[derive(PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    // Every buffer goes through here so the allocation tracker sees it.
    fn raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        alloc_track::on_alloc(rows, cols);
        Matrix { rows, cols, data }
    }

    /// Builds a matrix from row-major data, rejecting bad lengths and non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(SppError::shape(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(SppError::shape(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(SppError::argument(format!(
                "non-finite value {} at ({}, {})",
                data[pos],
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self::raw(rows, cols, data))
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(SppError::shape("ragged rows"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        assert!(value.is_finite());
        Self::raw(rows, cols, vec![value; rows * cols])
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 1.0)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix by evaluating `f(row, col)` for every entry.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::raw(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(mut self) -> Vec<f64> {
        std::mem::take(&mut self.data)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.data.iter()
    }

    /// Number of entries that are not exactly zero.
    pub fn nnz(&self) -> usize {
        self.data.iter().filter(|v| **v != 0.0).count()
    }

    pub fn is_all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    fn check_same_shape(&self, other: &Matrix, op: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(SppError::shape(format!(
                "{op}: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    fn zip_with(&self, other: &Matrix, op: &str, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        self.check_same_shape(other, op)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self::raw(self.rows, self.cols, data))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Self::raw(
            self.rows,
            self.cols,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Element-wise (Hadamard) product.
    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "hadamard", |a, b| a * b)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        self.map(|v| v * factor)
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, other: &Matrix, factor: f64) -> Result<Matrix> {
        self.zip_with(other, "add_scaled", |a, b| a + factor * b)
    }

    pub fn transpose(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.data[i * self.cols + j]);
            }
        }
        Self::raw(self.cols, self.rows, data)
    }

    /// `self · b_tᵀ`: `[b×n]` against `[m×n]` gives `[b×m]`, the `Y = X Wᵀ` of a
    /// linear layer.
    pub fn matmul(&self, b_t: &Matrix) -> Result<Matrix> {
        if self.cols != b_t.cols {
            return Err(SppError::shape(format!(
                "matmul: {}x{} against transposed {}x{}",
                self.rows, self.cols, b_t.rows, b_t.cols
            )));
        }
        let mut out = Vec::with_capacity(self.rows * b_t.rows);
        for i in 0..self.rows {
            let a_row = self.row(i);
            for j in 0..b_t.rows {
                out.push(dot(a_row, b_t.row(j)));
            }
        }
        Ok(Self::raw(self.rows, b_t.rows, out))
    }

    /// Plain product `self · b`: `[p×q]` times `[q×r]`.
    pub fn matmul_nn(&self, b: &Matrix) -> Result<Matrix> {
        if self.cols != b.rows {
            return Err(SppError::shape(format!(
                "matmul_nn: {}x{} times {}x{}",
                self.rows, self.cols, b.rows, b.cols
            )));
        }
        let mut out = vec![0.0; self.rows * b.cols];
        for i in 0..self.rows {
            for j in 0..b.cols {
                let mut acc = 0.0;
                for k in 0..self.cols {
                    acc += self.data[i * self.cols + k] * b.data[k * b.cols + j];
                }
                out[i * b.cols + j] = acc;
            }
        }
        Ok(Self::raw(self.rows, b.cols, out))
    }

    /// `selfᵀ · b`: `[p×q]ᵀ` times `[p×r]` gives `[q×r]`.
    pub fn matmul_tn(&self, b: &Matrix) -> Result<Matrix> {
        if self.rows != b.rows {
            return Err(SppError::shape(format!(
                "matmul_tn: {}x{} transposed times {}x{}",
                self.rows, self.cols, b.rows, b.cols
            )));
        }
        let mut out = vec![0.0; self.cols * b.cols];
        for i in 0..self.cols {
            for j in 0..b.cols {
                let mut acc = 0.0;
                for k in 0..self.rows {
                    acc += self.data[k * self.cols + i] * b.data[k * b.cols + j];
                }
                out[i * b.cols + j] = acc;
            }
        }
        Ok(Self::raw(self.cols, b.cols, out))
    }

    /// Repeats each row `k` times consecutively (interleaved):
    /// output row `i` is input row `i / k`.
    pub fn repeat_rows(&self, k: usize) -> Result<Matrix> {
        if k == 0 {
            return Err(SppError::argument("repeat count must be positive"));
        }
        let mut data = Vec::with_capacity(self.data.len() * k);
        for i in 0..self.rows {
            for _ in 0..k {
                data.extend_from_slice(self.row(i));
            }
        }
        Ok(Self::raw(self.rows * k, self.cols, data))
    }

    /// Expands an `m×1` column into `m×n`, each row constant.
    pub fn broadcast_col(&self, n: usize) -> Result<Matrix> {
        if self.cols != 1 {
            return Err(SppError::shape(format!(
                "broadcast_col expects a column vector, got {}x{}",
                self.rows, self.cols
            )));
        }
        if n == 0 {
            return Err(SppError::argument("broadcast width must be positive"));
        }
        let mut data = Vec::with_capacity(self.rows * n);
        for &v in &self.data {
            data.extend(std::iter::repeat_n(v, n));
        }
        Ok(Self::raw(self.rows, n, data))
    }

    /// Copies rows `start..end` into a new matrix.
    pub fn row_block(&self, start: usize, end: usize) -> Result<Matrix> {
        if start >= end || end > self.rows {
            return Err(SppError::shape(format!(
                "row block {start}..{end} out of range for {} rows",
                self.rows
            )));
        }
        Ok(Self::raw(
            end - start,
            self.cols,
            self.data[start * self.cols..end * self.cols].to_vec(),
        ))
    }

    /// Largest element-wise difference relative to the larger of the two magnitudes.
    pub fn max_rel_diff(&self, other: &Matrix) -> Result<f64> {
        self.check_same_shape(other, "max_rel_diff")?;
        let scale = self.max_abs().max(other.max_abs());
        if scale == 0.0 {
            return Ok(0.0);
        }
        let diff = self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        Ok(diff / scale)
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

impl Clone for Matrix {
    fn clone(&self) -> Self {
        Self::raw(self.rows, self.cols, self.data.clone())
    }
}

impl Drop for Matrix {
    fn drop(&mut self) {
        alloc_track::on_free(self.rows, self.cols);
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}
