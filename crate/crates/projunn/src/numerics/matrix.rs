//! Row-major dense matrix over either field. The universal carrier for
//! parameters, gradients and oracles.

use super::entry::{Entry, Field};
use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use std::ops::{Index, IndexMut};

/// Dense `rows x cols` matrix with row-major storage.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix<T: Entry> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Entry> std::fmt::Debug for DenseMatrix<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "DenseMatrix {}x{} ({:?})", self.rows, self.cols, T::FIELD)?;
        let rmax = self.rows.min(8);
        let cmax = self.cols.min(8);
        for r in 0..rmax {
            write!(f, "  [")?;
            for c in 0..cmax {
                write!(f, " {}", self[(r, c)])?;
            }
            writeln!(f, "{}]", if cmax < self.cols { " ..." } else { "" })?;
        }
        if rmax < self.rows {
            writeln!(f, "  ...")?;
        }
        Ok(())
    }
}

impl<T: Entry> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Build from a row-major buffer; `data.len()` must equal `rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "buffer length {} != {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn standard_normal<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| T::standard_normal(rng)).collect();
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }
    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }
    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }
    #[inline]
    pub fn field(&self) -> Field {
        T::FIELD
    }
    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }
    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }
    pub fn same_shape(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub fn col(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[T]) {
        assert_eq!(v.len(), self.rows);
        for (i, &x) in v.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Columns `0..k` as a new matrix.
    pub fn leading_cols(&self, k: usize) -> Self {
        assert!(k <= self.cols);
        Self::from_fn(self.rows, k, |r, c| self[(r, c)])
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn conj(&self) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x.conj()).collect() }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|x| x.scale(s))
    }

    pub fn scale_entry(&self, s: T) -> Self {
        self.map(|x| x * s)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert!(self.same_shape(other), "shape mismatch in add");
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert!(self.same_shape(other), "shape mismatch in sub");
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert!(self.same_shape(other), "shape mismatch in add_assign");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    /// self += alpha * other
    pub fn axpy(&mut self, alpha: T, other: &Self) {
        assert!(self.same_shape(other), "shape mismatch in axpy");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * *b;
        }
    }

    pub fn fro_norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x.modulus_sq()).sum()
    }

    pub fn fro_norm(&self) -> f64 {
        self.fro_norm_sq().sqrt()
    }

    pub fn max_modulus(&self) -> f64 {
        self.data.iter().map(|x| x.modulus()).fold(0.0, f64::max)
    }

    /// Largest imaginary component in modulus (0 on the real field).
    pub fn max_imag(&self) -> f64 {
        self.data.iter().map(|x| x.im().abs()).fold(0.0, f64::max)
    }

    pub fn has_nan(&self) -> bool {
        self.data.iter().any(|x| x.re().is_nan() || x.im().is_nan())
    }

    /// C = alpha * A * B + beta * C.
    pub fn gemm_into(alpha: T, a: &Self, b: &Self, beta: T, c: &mut Self) {
        assert_eq!(a.cols, b.rows, "inner dimension mismatch in gemm");
        assert_eq!(c.rows, a.rows, "output rows mismatch in gemm");
        assert_eq!(c.cols, b.cols, "output cols mismatch in gemm");
        if a.rows == 0 || b.cols == 0 {
            return;
        }
        if a.cols == 0 {
            // Empty inner dimension: C <- beta * C.
            for x in c.data.iter_mut() {
                *x = beta * *x;
            }
            return;
        }
        unsafe {
            T::gemm(
                a.rows,
                a.cols,
                b.cols,
                alpha,
                a.data.as_ptr(),
                a.cols as isize,
                1,
                b.data.as_ptr(),
                b.cols as isize,
                1,
                beta,
                c.data.as_mut_ptr(),
                c.cols as isize,
                1,
            );
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let mut c = Self::zeros(self.rows, other.cols);
        Self::gemm_into(T::ONE, self, other, T::ZERO, &mut c);
        c
    }

    /// y = A * x.
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        let mut y = vec![T::ZERO; self.rows];
        for (i, yi) in y.iter_mut().enumerate() {
            let row = self.row(i);
            let mut acc = T::ZERO;
            for (a, b) in row.iter().zip(x) {
                acc += *a * *b;
            }
            *yi = acc;
        }
        y
    }

    /// Promote to a complex matrix (identity on the complex field).
    pub fn to_complex(&self) -> DenseMatrix<Complex64> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x.to_c64()).collect(),
        }
    }

    /// Demote a complex matrix, dropping imaginary parts on the real field.
    /// Check `max_imag` first when the realness is a proof obligation.
    pub fn from_complex_lossy(m: &DenseMatrix<Complex64>) -> Self {
        DenseMatrix {
            rows: m.rows,
            cols: m.cols,
            data: m.data.iter().map(|&z| T::from_c64_lossy(z)).collect(),
        }
    }
}

impl<T: Entry> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &T {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl<T: Entry> IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// Hermitian inner product of two equal-length vectors, `sum conj(a_i) b_i`.
pub fn dot<T: Entry>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::ZERO;
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * *y;
    }
    acc
}

pub fn vec_norm<T: Entry>(a: &[T]) -> f64 {
    a.iter().map(|x| x.modulus_sq()).sum::<f64>().sqrt()
}
