use std::fmt;

use crate::error::{Error, Result};
use crate::tensor::Real;

/// Dense row-major matrix. Every element is finite.
#[derive(Clone, PartialEq)]
pub struct Matrix<T: Real = f64> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    /// Builds a matrix from row-major data, rejecting wrong lengths and
    /// non-finite values.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::DataLength {
                rows,
                cols,
                len: data.len(),
            });
        }
        let m = Matrix { rows, cols, data };
        m.check_finite("from_vec")?;
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DataLength {
                    rows: rows.len(),
                    cols,
                    len: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Matrix::from_vec(rows.len(), cols, data)
    }

    /// Crate-internal constructor for results whose finiteness is checked by
    /// the caller (or guaranteed by construction).
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(rows * cols, data.len());
        Matrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix::from_raw(rows, cols, vec![T::zero(); rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Result<Self> {
        Matrix::from_vec(rows, cols, vec![value; rows * cols])
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

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        // chunks_exact would yield nothing for zero-column matrices
        (0..self.rows).map(move |i| self.row(i))
    }

    pub(crate) fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Returns the matrix with its rows reordered so that output row `i` is
    /// input row `perm[i]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.rows {
            return Err(Error::shape("permute_rows", self.shape(), (perm.len(), 1)));
        }
        let mut data = Vec::with_capacity(self.data.len());
        for &p in perm {
            if p >= self.rows {
                return Err(Error::shape("permute_rows", self.shape(), (p + 1, 1)));
            }
            data.extend_from_slice(self.row(p));
        }
        Ok(Matrix::from_raw(self.rows, self.cols, data))
    }

    /// Multiplies row `i` by `scales[i]`.
    pub fn scale_rows(&self, scales: &[T]) -> Result<Self> {
        if scales.len() != self.rows {
            return Err(Error::shape("scale_rows", self.shape(), (scales.len(), 1)));
        }
        let mut out = self.clone();
        for (row, &c) in out.data.chunks_mut(self.cols.max(1)).zip(scales) {
            row.iter_mut().for_each(|x| *x = *x * c);
        }
        out.check_finite("scale_rows")?;
        Ok(out)
    }

    pub fn add(&self, other: &Matrix<T>) -> Result<Self> {
        self.zip_with("add", other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix<T>) -> Result<Self> {
        self.zip_with("sub", other, |a, b| a - b)
    }

    fn zip_with(&self, op: &'static str, other: &Matrix<T>, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::shape(op, self.shape(), other.shape()));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        let out = Matrix::from_raw(self.rows, self.cols, data);
        out.check_finite(op)?;
        Ok(out)
    }

    /// Largest absolute elementwise difference. Shapes must match.
    pub fn max_abs_diff(&self, other: &Matrix<T>) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(Error::shape("max_abs_diff", self.shape(), other.shape()));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs().as_f64())
            .fold(0.0, f64::max))
    }

    /// Largest elementwise `|a - b| / max(|b|, 1e-12)`, with `other` as the
    /// reference. Shapes must match.
    pub fn max_rel_diff(&self, other: &Matrix<T>) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(Error::shape("max_rel_diff", self.shape(), other.shape()));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs().as_f64() / b.abs().as_f64().max(1e-12))
            .fold(0.0, f64::max))
    }

    /// Per-column minimum and maximum.
    pub fn column_bounds(&self) -> Vec<(T, T)> {
        let mut bounds = vec![(T::infinity(), T::neg_infinity()); self.cols];
        for row in self.row_iter() {
            for (b, &x) in bounds.iter_mut().zip(row) {
                b.0 = b.0.min(x);
                b.1 = b.1.max(x);
            }
        }
        bounds
    }

    pub fn column_means(&self) -> Vec<T> {
        let mut sums = vec![T::zero(); self.cols];
        for row in self.row_iter() {
            for (s, &x) in sums.iter_mut().zip(row) {
                *s = *s + x;
            }
        }
        let n = T::of(self.rows as f64);
        sums.into_iter().map(|s| s / n).collect()
    }

    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix::from_raw(
            self.rows,
            self.cols,
            self.data.iter().map(|&x| U::of(x.as_f64())).collect(),
        )
    }

    pub(crate) fn check_finite(&self, context: &'static str) -> Result<()> {
        match self.data.iter().position(|x| !x.is_finite()) {
            None => Ok(()),
            Some(idx) => Err(Error::NonFinite {
                context,
                row: idx / self.cols.max(1),
                col: idx % self.cols.max(1),
            }),
        }
    }

    pub(crate) fn bytes(&self) -> usize {
        self.data.len() * std::mem::size_of::<T>()
    }
}

impl<T: Real> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for row in self.row_iter() {
            writeln!(f, "  {row:?}")?;
        }
        write!(f, "]")
    }
}
