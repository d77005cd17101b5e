//! Dense row-major matrices, activations, Gaussian log-densities and the
//! ridge-regularised symmetric solve used by the closed-form estimators.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Dense `f64` matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data. Fails if the length does not match
    /// or any entry is non-finite.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dim("Matrix::from_vec", rows * cols, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Matrix::from_vec"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_dim("Matrix::from_rows", cols, r.len())?;
            data.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, data)
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
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        check_dim("Matrix::matmul", self.cols, other.rows)?;
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a != 0.0 {
                    axpy(a, other.row(k), out_row);
                }
            }
        }
        Ok(out)
    }

    /// `self · x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("Matrix::matvec", self.cols, x.len())?;
        Ok((0..self.rows).map(|r| dot(self.row(r), x)).collect())
    }

    /// `selfᵀ · x`.
    pub fn t_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("Matrix::t_matvec", self.rows, x.len())?;
        let mut out = vec![0.0; self.cols];
        for (r, &xr) in x.iter().enumerate() {
            axpy(xr, self.row(r), &mut out);
        }
        Ok(out)
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `self + s · other`.
    pub fn add_scaled(&self, s: f64, other: &Matrix) -> Result<Matrix> {
        check_dim("Matrix::add_scaled rows", self.rows, other.rows)?;
        check_dim("Matrix::add_scaled cols", self.cols, other.cols)?;
        let mut out = self.clone();
        axpy(s, &other.data, &mut out.data);
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute entrywise difference; infinite when shapes differ.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        if self.shape() != other.shape() {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Dot product with four independent accumulators. The summation order is
/// fixed, so results are reproducible across runs and platforms.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for i in 0..chunks {
        let j = i * 4;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in chunks * 4..n {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += a · x`.
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// `ln(1 + eˣ)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

/// Logistic sigmoid, the derivative of [`softplus`].
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Log-density of a Gaussian with diagonal covariance `psi`.
pub fn logpdf_diag_gaussian(x: &[f64], mean: &[f64], psi: &[f64]) -> Result<f64> {
    check_dim("logpdf_diag_gaussian mean", x.len(), mean.len())?;
    check_dim("logpdf_diag_gaussian psi", x.len(), psi.len())?;
    let mut acc = 0.0;
    for ((&xd, &md), &pd) in x.iter().zip(mean).zip(psi) {
        if !(pd > 0.0) || !pd.is_finite() {
            return Err(Error::InvalidInput(format!(
                "variance must be positive and finite, got {pd}"
            )));
        }
        let r = xd - md;
        acc += -0.5 * (LN_2PI + libm::log(pd)) - r * r / (2.0 * pd);
    }
    Ok(acc)
}

/// `ln Σ exp(vᵢ)` computed stably. Returns `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let s: f64 = values.iter().map(|v| libm::exp(v - max)).sum();
    max + libm::log(s)
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
/// Only the lower triangle of `a` is read.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    check_dim("cholesky", a.rows(), a.cols())?;
    let n = a.rows();
    let scale = (0..n)
        .fold(0.0f64, |m, i| m.max(a.get(i, i).abs()))
        .max(1e-300);
    let tol = 1e-12 * scale;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let lj = l.row(j)[..j].to_vec();
        let d = a.get(j, j) - dot(&lj, &lj);
        if !(d > tol) {
            return Err(Error::Singular(format!(
                "matrix is not positive definite (pivot {j} = {d:e})"
            )));
        }
        let djj = libm::sqrt(d);
        l.set(j, j, djj);
        for i in j + 1..n {
            let v = (a.get(i, j) - dot(&l.row(i)[..j], &lj)) / djj;
            l.set(i, j, v);
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ X = rhs` given the Cholesky factor `l`.
pub fn cholesky_solve(l: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    check_dim("cholesky_solve", l.rows(), rhs.rows())?;
    let n = l.rows();
    let k = rhs.cols();
    let mut x = rhs.clone();
    // forward: L Y = B
    for i in 0..n {
        for j in 0..i {
            let lij = l.get(i, j);
            if lij != 0.0 {
                for c in 0..k {
                    let v = x.get(i, c) - lij * x.get(j, c);
                    x.set(i, c, v);
                }
            }
        }
        let lii = l.get(i, i);
        for c in 0..k {
            let v = x.get(i, c) / lii;
            x.set(i, c, v);
        }
    }
    // backward: Lᵀ X = Y
    for i in (0..n).rev() {
        for j in i + 1..n {
            let lji = l.get(j, i);
            if lji != 0.0 {
                for c in 0..k {
                    let v = x.get(i, c) - lji * x.get(j, c);
                    x.set(i, c, v);
                }
            }
        }
        let lii = l.get(i, i);
        for c in 0..k {
            let v = x.get(i, c) / lii;
            x.set(i, c, v);
        }
    }
    Ok(x)
}

/// Solves `(A + λI) X = rhs` for symmetric positive semidefinite `A` through a
/// Cholesky factorisation of `A + λI`.
pub fn ridge_solve(a: &Matrix, lambda: f64, rhs: &Matrix) -> Result<Matrix> {
    check_dim("ridge_solve square", a.rows(), a.cols())?;
    check_dim("ridge_solve rhs", a.rows(), rhs.rows())?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!(
            "ridge must be finite and non-negative, got {lambda}"
        )));
    }
    let mut reg = a.clone();
    for i in 0..a.rows() {
        let v = reg.get(i, i) + lambda;
        reg.set(i, i, v);
    }
    let l = cholesky(&reg)?;
    cholesky_solve(&l, rhs)
}
