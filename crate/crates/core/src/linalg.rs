//! Dense least squares for the small, tall design matrices the learners
//! build (`rows ≫ cols`, `cols` ≤ a few dozen).
//!
//! The primary route is a Householder QR; `lstsq_normal` solves the normal
//! equations by Cholesky and is kept as an independent second route.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Row-major dense matrix.
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

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(alloc::format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Appends the rows of `other` (same column count).
    pub fn append_rows(&mut self, other: &Matrix) -> Result<()> {
        if other.cols != self.cols {
            return Err(Error::Dimension("column count mismatch when stacking rows".into()));
        }
        self.data.extend_from_slice(&other.data);
        self.rows += other.rows;
        Ok(())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    /// `‖b − A x‖₂` evaluated at the returned solution.
    pub residual_norm: f64,
    /// 2-norm condition number of `A`.
    pub condition: f64,
}

/// Minimizes `‖b − A x‖₂` by Householder QR.
///
/// Fails with [`Error::IllPosed`] when `A` is numerically rank deficient,
/// i.e. `σ_min ≤ max(rows, cols) · ε · σ_max`.
pub fn lstsq_qr(a: &Matrix, b: &[f64]) -> Result<LeastSquares> {
    let (m, n) = (a.rows, a.cols);
    if b.len() != m {
        return Err(Error::Dimension(alloc::format!("rhs has {} rows, matrix {m}", b.len())));
    }
    if n == 0 {
        return Err(Error::Dimension("least squares with zero unknowns".into()));
    }
    if m < n {
        return Err(Error::IllPosed { condition: f64::INFINITY });
    }

    let mut qr = a.data.clone();
    let mut qtb = b.to_vec();
    for k in 0..n {
        let norm = libm::sqrt((k..m).map(|i| qr[i * n + k] * qr[i * n + k]).sum());
        if norm == 0.0 {
            continue;
        }
        let alpha = if qr[k * n + k] > 0.0 { -norm } else { norm };
        // v = x − α e₁, stored in place of column k
        qr[k * n + k] -= alpha;
        let vnorm2: f64 = (k..m).map(|i| qr[i * n + k] * qr[i * n + k]).sum();
        if vnorm2 == 0.0 {
            qr[k * n + k] = alpha;
            continue;
        }
        for j in k + 1..n {
            let s: f64 = (k..m).map(|i| qr[i * n + k] * qr[i * n + j]).sum();
            let f = 2.0 * s / vnorm2;
            for i in k..m {
                qr[i * n + j] -= f * qr[i * n + k];
            }
        }
        let s: f64 = (k..m).map(|i| qr[i * n + k] * qtb[i]).sum();
        let f = 2.0 * s / vnorm2;
        for i in k..m {
            qtb[i] -= f * qr[i * n + k];
        }
        qr[k * n + k] = alpha;
    }

    let mut r = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            r.set(i, j, qr[i * n + j]);
        }
    }
    let sv = singular_values(&r);
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if smax == 0.0 || smin <= m.max(n) as f64 * f64::EPSILON * smax {
        return Err(Error::IllPosed { condition });
    }

    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = qtb[i];
        for j in i + 1..n {
            s -= r.get(i, j) * x[j];
        }
        x[i] = s / r.get(i, i);
    }
    let residual_norm = residual_norm(a, &x, b);
    Ok(LeastSquares {
        coefficients: x,
        residual_norm,
        condition,
    })
}

pub fn residual_norm(a: &Matrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    libm::sqrt(ax.iter().zip(b).map(|(p, q)| (q - p) * (q - p)).sum())
}

/// `x = (AᵀA)⁻¹ Aᵀ b` through a Cholesky factorization of `AᵀA`.
pub fn lstsq_normal(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let (m, n) = (a.rows, a.cols);
    if b.len() != m {
        return Err(Error::Dimension(alloc::format!("rhs has {} rows, matrix {m}", b.len())));
    }
    let mut ata = vec![0.0; n * n];
    let mut atb = vec![0.0; n];
    for r in 0..m {
        let row = a.row(r);
        for i in 0..n {
            atb[i] += row[i] * b[r];
            for j in 0..=i {
                ata[i * n + j] += row[i] * row[j];
            }
        }
    }
    // lower-triangular Cholesky in place
    for j in 0..n {
        let mut d = ata[j * n + j];
        for k in 0..j {
            d -= ata[j * n + k] * ata[j * n + k];
        }
        if d.is_nan() || d <= 0.0 {
            return Err(Error::IllPosed { condition: f64::INFINITY });
        }
        let d = libm::sqrt(d);
        ata[j * n + j] = d;
        for i in j + 1..n {
            let mut s = ata[i * n + j];
            for k in 0..j {
                s -= ata[i * n + k] * ata[j * n + k];
            }
            ata[i * n + j] = s / d;
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = atb[i];
        for k in 0..i {
            s -= ata[i * n + k] * y[k];
        }
        y[i] = s / ata[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= ata[k * n + i] * x[k];
        }
        x[i] = s / ata[i * n + i];
    }
    Ok(x)
}

/// Singular values of a small square matrix by one-sided Jacobi rotations.
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    let (m, n) = (a.rows, a.cols);
    // work on columns
    let mut u: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a.get(i, j)).collect()).collect();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = u[p].iter().map(|v| v * v).sum();
                let beta: f64 = u[q].iter().map(|v| v * v).sum();
                let gamma: f64 = u[p].iter().zip(&u[q]).map(|(x, y)| x * y).sum();
                if gamma == 0.0 || libm::fabs(gamma) <= 1e-15 * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (libm::fabs(zeta) + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (u[p][i], u[q][i]);
                    u[p][i] = c * x - s * y;
                    u[q][i] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    u.iter().map(|col| libm::sqrt(col.iter().map(|v| v * v).sum())).collect()
}
