//! Dense linear algebra for small matrices: one-sided Jacobi SVD and the
//! pseudo-inverses built on top of it.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("Jacobi SVD did not converge after {0} sweeps")]
    NoConvergence(usize),
    #[error("normal equations are singular (pivot {pivot} at row {row})")]
    Singular { row: usize, pivot: f64 },
    #[error("empty matrix")]
    Empty,
}

/// Row-major `f64` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
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

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn from_f32(rows: usize, cols: usize, data: &[f32]) -> Self {
        Self::from_rows(rows, cols, data.iter().map(|&v| f64::from(v)).collect())
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shapes");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let src = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// Row vector times matrix.
    pub fn vec_mul(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows, "vec_mul shapes");
        let mut out = vec![0.0; self.cols];
        for (k, &a) in v.iter().enumerate() {
            for (o, &b) in out.iter_mut().zip(&self.data[k * self.cols..(k + 1) * self.cols]) {
                *o += a * b;
            }
        }
        out
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Thin SVD `A = U diag(S) V^T`; `U` is `m x k`, `V` is `n x k` with
/// `k = min(m, n)` and `S` non-negative, descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

impl Svd {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for r in 0..us.rows {
            for c in 0..us.cols {
                us.data[r * us.cols + c] *= self.s[c];
            }
        }
        us.matmul(&self.v.transpose())
    }
}

pub const JACOBI_MAX_SWEEPS: usize = 100;

pub fn svd_small(a: &Matrix) -> Result<Svd, LinalgError> {
    if a.rows == 0 || a.cols == 0 {
        return Err(LinalgError::Empty);
    }
    if a.rows < a.cols {
        let t = svd_small(&a.transpose())?;
        return Ok(Svd { u: t.v, s: t.s, v: t.u });
    }
    let (m, n) = (a.rows, a.cols);
    // Columns stored contiguously.
    let mut u: Vec<Vec<f64>> = (0..n).map(|c| (0..m).map(|r| a.get(r, c)).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|c| {
            let mut e = vec![0.0; n];
            e[c] = 1.0;
            e
        })
        .collect();
    let eps = f64::EPSILON;
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = u[p]
                    .iter()
                    .zip(&u[q])
                    .fold((0.0, 0.0, 0.0), |(a, b, g), (x, y)| (a + x * x, b + y * y, g + x * y));
                if gamma == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = u.split_at_mut(q);
                for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                    let (xp, yq) = (*x, *y);
                    *x = c * xp - s * yq;
                    *y = s * xp + c * yq;
                }
                let (lo, hi) = v.split_at_mut(q);
                for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                    let (xp, yq) = (*x, *y);
                    *x = c * xp - s * yq;
                    *y = s * xp + c * yq;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence(JACOBI_MAX_SWEEPS));
    }
    let mut sv: Vec<(f64, usize)> = u.iter().enumerate().map(|(i, c)| (c.iter().map(|x| x * x).sum::<f64>().sqrt(), i)).collect();
    sv.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut um = Matrix::zeros(m, n);
    let mut vm = Matrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (k, &(sigma, i)) in sv.iter().enumerate() {
        s.push(sigma);
        for r in 0..m {
            um.set(r, k, if sigma > 0.0 { u[i][r] / sigma } else { 0.0 });
        }
        for r in 0..n {
            vm.set(r, k, v[i][r]);
        }
    }
    Ok(Svd { u: um, s, v: vm })
}

/// Pseudo-inverse `V S^+ U^T`, dropping singular values below
/// `max(m, n) * eps * s_max`.
pub fn pinv_svd(a: &Matrix) -> Result<Matrix, LinalgError> {
    let svd = svd_small(a)?;
    let cutoff = a.rows.max(a.cols) as f64 * f64::EPSILON * svd.s.first().copied().unwrap_or(0.0);
    let mut vs = svd.v.clone();
    for r in 0..vs.rows {
        for c in 0..vs.cols {
            let s = svd.s[c];
            vs.data[r * vs.cols + c] *= if s > cutoff { 1.0 / s } else { 0.0 };
        }
    }
    Ok(vs.matmul(&svd.u.transpose()))
}

/// Solves `G X = B` for symmetric positive definite `G` by Cholesky.
pub fn cholesky_solve(g: &Matrix, b: &Matrix) -> Result<Matrix, LinalgError> {
    let n = g.rows;
    assert_eq!(g.cols, n);
    assert_eq!(b.rows, n);
    let scale = (0..n).map(|i| g.get(i, i).abs()).fold(0.0, f64::max);
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = g.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if !(d > 1e-12 * scale) {
            return Err(LinalgError::Singular { row: j, pivot: d });
        }
        let d = d.sqrt();
        l.set(j, j, d);
        for i in j + 1..n {
            let mut s = g.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / d);
        }
    }
    let mut x = b.clone();
    for c in 0..b.cols {
        for i in 0..n {
            let mut s = x.get(i, c);
            for k in 0..i {
                s -= l.get(i, k) * x.get(k, c);
            }
            x.set(i, c, s / l.get(i, i));
        }
        for i in (0..n).rev() {
            let mut s = x.get(i, c);
            for k in i + 1..n {
                s -= l.get(k, i) * x.get(k, c);
            }
            x.set(i, c, s / l.get(i, i));
        }
    }
    Ok(x)
}

/// `(A^T A + lambda I)^{-1} A^T`, evaluated on the smaller Gram matrix
/// (`A^T (A A^T + lambda I)^{-1}` when `A` is wide; the two are equal).
pub fn pinv_normal(a: &Matrix, lambda: f64) -> Result<Matrix, LinalgError> {
    if a.rows == 0 || a.cols == 0 {
        return Err(LinalgError::Empty);
    }
    let at = a.transpose();
    let add_ridge = |mut g: Matrix| {
        for i in 0..g.rows {
            g.data[i * g.cols + i] += lambda;
        }
        g
    };
    if a.rows >= a.cols {
        let g = add_ridge(at.matmul(a));
        cholesky_solve(&g, &at)
    } else {
        let g = add_ridge(a.matmul(&at));
        // A^T G^{-1} = (G^{-1} A)^T since G is symmetric.
        Ok(cholesky_solve(&g, a)?.transpose())
    }
}
