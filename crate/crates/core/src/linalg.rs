//! Dense row-major matrices and the deterministic factorizations the rest of
//! the crate builds on.
//!
//! Everything here targets moderate dimensions (a few hundred at most), where
//! bit-for-bit reproducibility across runs and thread counts matters more than
//! peak throughput. The eigensolver is a cyclic Jacobi iteration with a fixed
//! row-major sweep order, so equal inputs always take the identical sequence of
//! rotations.

use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};

/// Dense matrix with row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds from a row-major buffer; `data.len()` must equal `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Mat { rows, cols, data })
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
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// `self * other`.
    pub fn mul(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch {
                left: (self.rows, self.cols),
                right: (other.rows, other.cols),
            });
        }
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = &self.data[i * self.cols..(i + 1) * self.cols];
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &aik) in a_row.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &bkj) in out_row.iter_mut().zip(b_row.iter()) {
                    *o += aik * bkj;
                }
            }
        }
        Ok(out)
    }

    /// `self * other^T`, avoiding an explicit transpose.
    pub fn mul_transpose(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.cols {
            return Err(Error::ShapeMismatch {
                left: (self.rows, self.cols),
                right: (other.cols, other.rows),
            });
        }
        let mut out = Mat::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a_row = &self.data[i * self.cols..(i + 1) * self.cols];
            for j in 0..other.rows {
                let b_row = &other.data[j * other.cols..(j + 1) * other.cols];
                out.data[i * other.rows + j] = dot(a_row, b_row);
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.cols != x.len() {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: x.len(),
            });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, c: f64, other: &Mat) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch {
                left: (self.rows, self.cols),
                right: (other.rows, other.cols),
            });
        }
        for (a, &b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += c * b;
        }
        Ok(())
    }

    /// `self += c * u * v^T`.
    pub fn add_outer(&mut self, c: f64, u: &[f64], v: &[f64]) -> Result<()> {
        if u.len() != self.rows || v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                found: u.len() * v.len(),
            });
        }
        for (i, &ui) in u.iter().enumerate() {
            let row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (r, &vj) in row.iter_mut().zip(v.iter()) {
                *r += c * ui * vj;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, c: f64) {
        for a in self.data.iter_mut() {
            *a *= c;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Largest `|a_ij - a_ji|`; zero for exactly symmetric matrices.
    pub fn max_asymmetry(&self) -> Result<f64> {
        if self.rows != self.cols {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        Ok(worst)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_l2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Eigendecomposition of a symmetric matrix: `a = vectors * diag(values) * vectors^T`.
///
/// `values[k]` pairs with column `k` of `vectors`; the order is whatever the
/// sweep produced, not sorted.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigendecomposition for symmetric matrices.
///
/// Rotations are applied in a fixed row-major order over the upper triangle,
/// and the iteration stops once every off-diagonal entry is below
/// `1e-12 * frobenius_norm(a)`. Input asymmetry is averaged away before the
/// sweeps; callers with a symmetry contract must check it themselves.
pub fn sym_eigen(a: &Mat) -> Result<SymEigen> {
    if a.rows != a.cols {
        return Err(Error::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let n = a.rows;
    let mut work = a.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (work.get(i, j) + work.get(j, i));
            work.set(i, j, avg);
            work.set(j, i, avg);
        }
    }
    let mut vectors = Mat::identity(n);
    let tol = 1e-12 * work.frobenius_norm();
    if n < 2 || tol == 0.0 {
        return Ok(SymEigen {
            values: (0..n).map(|i| work.get(i, i)).collect(),
            vectors,
        });
    }

    for _sweep in 0..=JACOBI_MAX_SWEEPS {
        let mut off_max = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off_max = off_max.max(work.get(p, q).abs());
            }
        }
        if off_max <= tol {
            return Ok(SymEigen {
                values: (0..n).map(|i| work.get(i, i)).collect(),
                vectors,
            });
        }
        if _sweep == JACOBI_MAX_SWEEPS {
            break;
        }
        for p in 0..(n - 1) {
            for q in (p + 1)..n {
                let apq = work.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (work.get(q, q) - work.get(p, p)) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                let app = work.get(p, p);
                let aqq = work.get(q, q);
                work.set(p, p, app - t * apq);
                work.set(q, q, aqq + t * apq);
                work.set(p, q, 0.0);
                work.set(q, p, 0.0);
                for i in 0..n {
                    if i == p || i == q {
                        continue;
                    }
                    let aip = work.get(i, p);
                    let aiq = work.get(i, q);
                    let new_ip = aip - s * (aiq + tau * aip);
                    let new_iq = aiq + s * (aip - tau * aiq);
                    work.set(i, p, new_ip);
                    work.set(p, i, new_ip);
                    work.set(i, q, new_iq);
                    work.set(q, i, new_iq);
                }
                for i in 0..n {
                    let vip = vectors.get(i, p);
                    let viq = vectors.get(i, q);
                    vectors.set(i, p, c * vip - s * viq);
                    vectors.set(i, q, s * vip + c * viq);
                }
            }
        }
    }
    Err(Error::NoConvergence {
        sweeps: JACOBI_MAX_SWEEPS,
    })
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
///
/// Only the lower triangle of `a` is read. Fails with `NotPositiveDefinite`
/// on the first non-positive pivot.
pub fn cholesky(a: &Mat) -> Result<Mat> {
    if a.rows != a.cols {
        return Err(Error::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let n = a.rows;
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut diag = a.get(j, j);
        for k in 0..j {
            diag -= l.get(j, k) * l.get(j, k);
        }
        if diag <= 0.0 || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let ljj = diag.sqrt();
        l.set(j, j, ljj);
        for i in (j + 1)..n {
            let mut sum = a.get(i, j);
            for k in 0..j {
                sum -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, sum / ljj);
        }
    }
    Ok(l)
}

/// Solves `L L^T x = b` given the Cholesky factor `L`.
pub fn cholesky_solve(l: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    let n = l.rows;
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l.get(i, k) * y[k];
        }
        y[i] = sum / l.get(i, i);
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l.get(k, i) * x[k];
        }
        x[i] = sum / l.get(i, i);
    }
    Ok(x)
}

/// Inverse of `L L^T` from its Cholesky factor, symmetrized exactly.
pub fn cholesky_inverse(l: &Mat) -> Result<Mat> {
    let n = l.rows;
    let mut inv = Mat::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = cholesky_solve(l, &e)?;
        e[j] = 0.0;
        for i in 0..n {
            inv.set(i, j, col[i]);
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (inv.get(i, j) + inv.get(j, i));
            inv.set(i, j, avg);
            inv.set(j, i, avg);
        }
    }
    Ok(inv)
}

/// Singular value decomposition `a = u * diag(sigma) * v^T` with
/// `sigma` sorted descending.
///
/// Computed from the Jacobi eigendecomposition of `a^T a`. Left singular
/// vectors for singular values below `1e-14 * sigma_max` are returned as zero
/// columns; consumers weighting by functions that vanish at zero never read
/// them.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Mat,
    pub sigma: Vec<f64>,
    pub v: Mat,
}

pub fn svd(a: &Mat) -> Result<Svd> {
    let gram = a.transpose().mul(a)?;
    let eig = sym_eigen(&gram)?;
    let n = a.cols;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.values[j]
            .partial_cmp(&eig.values[i])
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });

    let mut sigma = Vec::with_capacity(n);
    let mut v = Mat::zeros(n, n);
    let mut u = Mat::zeros(a.rows, n);
    for (k, &src) in order.iter().enumerate() {
        let s = eig.values[src].max(0.0).sqrt();
        sigma.push(s);
        for i in 0..n {
            v.set(i, k, eig.vectors.get(i, src));
        }
    }
    let cutoff = 1e-14 * sigma.first().copied().unwrap_or(0.0);
    for k in 0..n {
        if sigma[k] <= cutoff || sigma[k] == 0.0 {
            continue;
        }
        let vk = v.col(k);
        let uk = a.mul_vec(&vk)?;
        for i in 0..a.rows {
            u.set(i, k, uk[i] / sigma[k]);
        }
    }
    Ok(Svd { u, sigma, v })
}

/// Largest singular value.
pub fn op_norm(a: &Mat) -> Result<f64> {
    let gram = a.transpose().mul(a)?;
    let eig = sym_eigen(&gram)?;
    Ok(eig.values.iter().fold(0.0f64, |m, &x| m.max(x.max(0.0))).sqrt())
}

/// Orthonormalizes the columns of `a` by modified Gram-Schmidt.
///
/// The construction fixes each diagonal of the implicit `R` factor positive,
/// so feeding i.i.d. standard normal entries yields a Haar-distributed
/// orthogonal matrix.
pub fn orthonormal_columns(a: &Mat) -> Result<Mat> {
    let (rows, cols) = (a.rows, a.cols);
    if cols > rows {
        return Err(Error::ShapeMismatch {
            left: (rows, cols),
            right: (rows, rows),
        });
    }
    let mut q = a.clone();
    for j in 0..cols {
        let mut col: Vec<f64> = (0..rows).map(|i| q.get(i, j)).collect();
        let scale = norm_l2(&col);
        for k in 0..j {
            let qk: Vec<f64> = (0..rows).map(|i| q.get(i, k)).collect();
            let r = dot(&qk, &col);
            for i in 0..rows {
                col[i] -= r * qk[i];
            }
        }
        let rjj = norm_l2(&col);
        if rjj <= 1e-12 * (scale + 1.0) {
            return Err(Error::RankDeficient);
        }
        for i in 0..rows {
            q.set(i, j, col[i] / rjj);
        }
    }
    Ok(q)
}
