//! Dense LU with partial pivoting. Used as a test oracle for small systems.

use crate::error::{Error, Result};

/// Largest dimension `dense_solve` accepts by default.
pub const DEFAULT_DENSE_CAP: usize = 5000;

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n);
        for i in 0..n {
            *m.at_mut(i, i) = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(DenseMatrix { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.data[i * self.n..(i + 1) * self.n].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Solves `a x = rhs` with the default size cap.
pub fn dense_solve(a: &DenseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    dense_solve_capped(a, rhs, DEFAULT_DENSE_CAP)
}

pub fn dense_solve_capped(a: &DenseMatrix, rhs: &[f64], cap: usize) -> Result<Vec<f64>> {
    let n = a.n;
    if rhs.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: rhs.len() });
    }
    if n > cap {
        return Err(Error::param("dense_solve", format!("dimension {n} exceeds cap {cap}")));
    }
    let mut m = a.data.clone();
    let mut x = rhs.to_vec();
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    for k in 0..n {
        let (p, pivot) = (k..n)
            .map(|r| (r, m[r * n + k].abs()))
            .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
        if pivot <= f64::EPSILON * scale * n as f64 || pivot == 0.0 {
            return Err(Error::Singular(k));
        }
        if p != k {
            for c in 0..n {
                m.swap(k * n + c, p * n + c);
            }
            x.swap(k, p);
        }
        let d = m[k * n + k];
        for r in k + 1..n {
            let l = m[r * n + k] / d;
            if l == 0.0 {
                continue;
            }
            m[r * n + k] = 0.0;
            for c in k + 1..n {
                m[r * n + c] -= l * m[k * n + c];
            }
            x[r] -= l * x[k];
        }
    }
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|c| m[k * n + c] * x[c]).sum();
        x[k] = (x[k] - s) / m[k * n + k];
    }
    Ok(x)
}
