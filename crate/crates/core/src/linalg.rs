//! Small dense linear algebra: Householder least squares with optional
//! Tikhonov damping, and eigenvalues of symmetric tridiagonal matrices.
//!
//! The collocation systems in this crate are at most a few thousand rows by a
//! few hundred columns, so a plain column-major-free row-major layout with
//! O(mn^2) Householder QR is entirely adequate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("least-squares system is rank deficient (|r[{col},{col}]| = {pivot:.3e}); add Tikhonov regularization")]
    RankDeficient { col: usize, pivot: f64 },
    #[error("dimension mismatch: matrix is {rows}x{cols}, rhs has length {rhs}")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        rhs: usize,
    },
    #[error("tridiagonal eigenvalue iteration failed to converge at index {0}")]
    EigenNoConvergence(usize),
}

/// Dense row-major matrix of f64.
#[derive(Debug, Clone)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Solve `min ||A x - b||_2^2 + lambda^2 ||x||_2^2` by Householder QR on the
/// augmented system `[A; lambda I] x ~ [b; 0]`.
///
/// With `lambda = 0` this is plain least squares; a numerically rank-deficient
/// triangle is then reported as [`LinalgError::RankDeficient`].
pub fn lstsq_tikhonov(a: &Matrix, b: &[f64], lambda: f64) -> Result<Vec<f64>, LinalgError> {
    if b.len() != a.rows {
        return Err(LinalgError::DimensionMismatch {
            rows: a.rows,
            cols: a.cols,
            rhs: b.len(),
        });
    }
    let n = a.cols;
    let extra = if lambda > 0.0 { n } else { 0 };
    let m = a.rows + extra;
    assert!(
        m >= n,
        "least squares needs at least as many rows as columns"
    );

    let mut q = Matrix::zeros(m, n);
    for i in 0..a.rows {
        for j in 0..n {
            q.set(i, j, a.get(i, j));
        }
    }
    if lambda > 0.0 {
        for j in 0..n {
            q.set(a.rows + j, j, lambda);
        }
    }
    let mut rhs = b.to_vec();
    rhs.resize(m, 0.0);

    // Householder transforms applied column by column to q and rhs.
    for j in 0..n {
        let mut norm2 = 0.0;
        for i in j..m {
            let v = q.get(i, j);
            norm2 += v * v;
        }
        let norm = norm2.sqrt();
        if norm == 0.0 {
            return Err(LinalgError::RankDeficient { col: j, pivot: 0.0 });
        }
        let pivot = q.get(j, j);
        let alpha = if pivot >= 0.0 { -norm } else { norm };
        // v = x - alpha e1, stored in place of column j below the diagonal.
        let v0 = pivot - alpha;
        q.set(j, j, v0);
        let vtv = norm2 - pivot * pivot + v0 * v0;
        if vtv > 0.0 {
            let inv = 2.0 / vtv;
            for col in (j + 1)..n {
                let mut dot = 0.0;
                for i in j..m {
                    dot += q.get(i, j) * q.get(i, col);
                }
                let scale = dot * inv;
                for i in j..m {
                    let upd = q.get(i, col) - scale * q.get(i, j);
                    q.set(i, col, upd);
                }
            }
            let mut dot = 0.0;
            for i in j..m {
                dot += q.get(i, j) * rhs[i];
            }
            let scale = dot * inv;
            for i in j..m {
                rhs[i] -= scale * q.get(i, j);
            }
        }
        // Diagonal of R.
        q.set(j, j, alpha);
    }

    // Rank check on the triangle.
    let max_diag = (0..n).fold(0.0_f64, |mx, j| mx.max(q.get(j, j).abs()));
    let tol = max_diag * (n as f64) * f64::EPSILON * 16.0;
    for j in 0..n {
        let d = q.get(j, j).abs();
        if d <= tol {
            return Err(LinalgError::RankDeficient { col: j, pivot: d });
        }
    }

    // Back substitution.
    let mut x = vec![0.0; n];
    for j in (0..n).rev() {
        let mut s = rhs[j];
        for col in (j + 1)..n {
            s -= q.get(j, col) * x[col];
        }
        x[j] = s / q.get(j, j);
    }
    Ok(x)
}

/// Eigenvalues of a symmetric tridiagonal matrix, ascending.
///
/// `diag` has length n, `off` length n-1 (subdiagonal). Implicit-shift QL
/// iteration, eigenvalues only.
pub fn sym_tridiag_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = diag.len();
    assert_eq!(off.len(), n.saturating_sub(1));
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(LinalgError::EigenNoConvergence(l));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut underflowed = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflowed = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflowed {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(d)
}
