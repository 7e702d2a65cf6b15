//! Column-major dense complex matrices and a few BLAS-like kernels.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::C64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Dense complex matrix stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Mat {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn<F: FnMut(usize, usize) -> C64>(rows: usize, cols: usize, mut f: F) -> Mat {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    /// Wraps column-major data.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Mat> {
        crate::error::check_len(rows * cols, data.len())?;
        Ok(Mat { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn col(&self, j: usize) -> &[C64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [C64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        (0..self.cols).map(|j| self.col(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&mut self, alpha: C64) {
        self.data.iter_mut().for_each(|z| *z *= alpha);
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: C64, other: &Mat) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        let mut out = self.clone();
        out.add_scaled(-ONE, other);
        out
    }

    /// Copy of rows `r` and columns `c`.
    pub fn block(&self, r: std::ops::Range<usize>, c: std::ops::Range<usize>) -> Mat {
        Mat::from_fn(r.len(), c.len(), |i, j| self[(r.start + i, c.start + j)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Mat) {
        for j in 0..b.cols {
            let dst = (c0 + j) * self.rows + r0;
            self.data[dst..dst + b.rows].copy_from_slice(b.col(j));
        }
    }

    /// Rows picked by index, all columns.
    pub fn select_rows(&self, idx: &[usize]) -> Mat {
        Mat::from_fn(idx.len(), self.cols, |i, j| self[(idx[i], j)])
    }

    pub fn select_cols(&self, idx: &[usize]) -> Mat {
        let mut data = Vec::with_capacity(self.rows * idx.len());
        for &j in idx {
            data.extend_from_slice(self.col(j));
        }
        Mat { rows: self.rows, cols: idx.len(), data }
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.rows];
        self.matvec_acc(ONE, x, &mut y);
        y
    }

    /// `y += alpha * self * x`.
    pub fn matvec_acc(&self, alpha: C64, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        for (j, &xj) in x.iter().enumerate() {
            if xj == ZERO {
                continue;
            }
            let s = alpha * xj;
            for (yi, a) in y.iter_mut().zip(self.col(j)) {
                *yi += s * a;
            }
        }
    }

    /// `y += alpha * selfᴴ * x`.
    pub fn adjoint_matvec_acc(&self, alpha: C64, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.rows);
        assert_eq!(y.len(), self.cols);
        for (j, yj) in y.iter_mut().enumerate() {
            let s: C64 = self.col(j).iter().zip(x).map(|(a, b)| a.conj() * b).sum();
            *yj += alpha * s;
        }
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut c = Mat::zeros(self.rows, other.cols);
        gemm(ONE, self, false, other, false, ZERO, &mut c);
        c
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_column_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<C64>) -> Mat {
        Mat { rows: m.nrows(), cols: m.ncols(), data: m.as_slice().to_vec() }
    }

    /// Inverse by LU with partial pivoting.
    pub fn inverse(&self) -> Result<Mat> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch { expected: self.rows, found: self.cols });
        }
        self.to_nalgebra()
            .try_inverse()
            .map(|m| Mat::from_nalgebra(&m))
            .ok_or(Error::SingularPivot { step: 0, magnitude: 0.0 })
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[j * self.rows + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[j * self.rows + i]
    }
}

/// `c = alpha * op(a) * op(b) + beta * c` where `op` optionally conjugate-transposes.
pub fn gemm(alpha: C64, a: &Mat, a_adj: bool, b: &Mat, b_adj: bool, beta: C64, c: &mut Mat) {
    let (m, k) = if a_adj { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let (kb, n) = if b_adj { (b.cols, b.rows) } else { (b.rows, b.cols) };
    assert_eq!(k, kb);
    assert_eq!((c.rows, c.cols), (m, n));
    if a_adj || b_adj {
        // The kernel has no conjugation flag; conjugate copies are cheap next to the product.
        let ca;
        let a = if a_adj {
            ca = conj_transpose(a);
            &ca
        } else {
            a
        };
        let cb;
        let b = if b_adj {
            cb = conj_transpose(b);
            &cb
        } else {
            b
        };
        return gemm(alpha, a, false, b, false, beta, c);
    }
    // SAFETY: all three matrices are dense column-major buffers of the asserted shapes.
    unsafe {
        gemm_raw(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            1,
            a.rows as isize,
            b.data.as_ptr(),
            1,
            b.rows as isize,
            beta,
            c.data.as_mut_ptr(),
            1,
            c.rows as isize,
        );
    }
}

pub fn conj_transpose(a: &Mat) -> Mat {
    Mat::from_fn(a.cols, a.rows, |i, j| a[(j, i)].conj())
}

/// Strided complex matrix product on raw buffers.
///
/// # Safety
/// The pointers and strides must describe valid, non-aliasing (for `c`)
/// `m×k`, `k×n` and `m×n` matrices.
#[allow(clippy::too_many_arguments)]
pub(crate) unsafe fn gemm_raw(
    m: usize,
    k: usize,
    n: usize,
    alpha: C64,
    a: *const C64,
    rsa: isize,
    csa: isize,
    b: *const C64,
    rsb: isize,
    csb: isize,
    beta: C64,
    c: *mut C64,
    rsc: isize,
    csc: isize,
) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for j in 0..n {
            for i in 0..m {
                let p = c.offset(i as isize * rsc + j as isize * csc);
                *p *= beta;
            }
        }
        return;
    }
    matrixmultiply::zgemm(
        matrixmultiply::CGemmOption::Standard,
        matrixmultiply::CGemmOption::Standard,
        m,
        k,
        n,
        [alpha.re, alpha.im],
        a as *const [f64; 2],
        rsa,
        csa,
        b as *const [f64; 2],
        rsb,
        csb,
        [beta.re, beta.im],
        c as *mut [f64; 2],
        rsc,
        csc,
    );
}

pub fn norm2(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Hermitian inner product `xᴴ y`.
pub fn dot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `||a - b|| / ||b||`, or `||a||` when `b` vanishes.
pub fn rel_diff(a: &[C64], b: &[C64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let den = norm2(b);
    if den == 0.0 {
        num
    } else {
        num / den
    }
}
