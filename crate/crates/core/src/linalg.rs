//! Small dense-matrix helpers shared by the estimators.
//!
//! Nothing here tries to be a general linear-algebra library: the estimators
//! need row-major storage, a handful of products, and a Cholesky solve for
//! ridge normal equations whose dimension is the number of spectral points
//! (tens, not thousands).

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    /// All-zeros matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    /// Build from row-major data; `data.len()` must equal `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Option<Self> {
        (data.len() == rows * cols).then_some(Mat { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Column means.
    pub fn col_means(&self) -> Vec<T> {
        let mut means = vec![T::zero(); self.cols];
        for r in 0..self.rows {
            for (m, &v) in means.iter_mut().zip(self.row(r)) {
                *m += v;
            }
        }
        let n = T::from_usize(self.rows).expect("row count fits scalar");
        for m in &mut means {
            *m /= n;
        }
        means
    }

    /// Copy of the listed rows, in the order given.
    pub fn take_rows(&self, rows: &[usize]) -> Mat<T> {
        let mut out = Mat::zeros(rows.len(), self.cols);
        for (dst, &src) in rows.iter().enumerate() {
            out.row_mut(dst).copy_from_slice(self.row(src));
        }
        out
    }

    /// `self^T * other`, where both have the same row count.
    pub fn t_mul(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!(self.rows, other.rows, "t_mul: row counts must match");
        let mut out = Mat::zeros(self.cols, other.cols);
        for r in 0..self.rows {
            let a = self.row(r);
            let b = other.row(r);
            for (i, &ai) in a.iter().enumerate() {
                let dst = out.row_mut(i);
                for (d, &bj) in dst.iter_mut().zip(b) {
                    *d += ai * bj;
                }
            }
        }
        out
    }
}

/// Row-major matrix of small integer labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ByteMat {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl ByteMat {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<u8>) -> Option<Self> {
        (data.len() == rows * cols).then_some(ByteMat { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> u8 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[u8] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }
}

/// Solve `A X = B` for symmetric positive-definite `A` via Cholesky.
///
/// Returns `None` when a pivot is not strictly positive, i.e. `A` is not
/// positive definite within floating-point arithmetic.
pub fn cholesky_solve<T: Real>(a: &Mat<T>, b: &Mat<T>) -> Option<Mat<T>> {
    let k = a.rows();
    assert_eq!(a.cols(), k, "cholesky_solve: A must be square");
    assert_eq!(b.rows(), k, "cholesky_solve: B row count must match A");

    // Lower-triangular factor, computed column by column.
    let mut l = Mat::zeros(k, k);
    for j in 0..k {
        let mut diag = a.at(j, j);
        for p in 0..j {
            let v = l.at(j, p);
            diag -= v * v;
        }
        if diag <= T::zero() || !diag.is_finite() {
            return None;
        }
        let diag = diag.sqrt();
        l.set(j, j, diag);
        for i in (j + 1)..k {
            let mut v = a.at(i, j);
            for p in 0..j {
                v -= l.at(i, p) * l.at(j, p);
            }
            l.set(i, j, v / diag);
        }
    }

    // Forward substitution: L Y = B.
    let mut y = b.clone();
    for i in 0..k {
        for p in 0..i {
            let lip = l.at(i, p);
            let (head, tail) = y.data.split_at_mut(i * y.cols);
            let src = &head[p * y.cols..(p + 1) * y.cols];
            for (d, &s) in tail[..y.cols].iter_mut().zip(src) {
                *d -= lip * s;
            }
        }
        let lii = l.at(i, i);
        for v in y.row_mut(i) {
            *v /= lii;
        }
    }

    // Back substitution: L^T X = Y.
    let mut x = y;
    for i in (0..k).rev() {
        for p in (i + 1)..k {
            let lpi = l.at(p, i);
            let (head, tail) = x.data.split_at_mut(p * x.cols);
            let dst = &mut head[i * x.cols..(i + 1) * x.cols];
            for (d, &s) in dst.iter_mut().zip(&tail[..x.cols]) {
                *d -= lpi * s;
            }
        }
        let lii = l.at(i, i);
        for v in x.row_mut(i) {
            *v /= lii;
        }
    }
    Some(x)
}
