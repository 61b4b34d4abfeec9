//! Inverses of the singular Neumann and periodic Laplacians on mean-zero data.
//!
//! Both operators annihilate constants. Right-hand sides must have zero mean;
//! solutions are returned with zero mean.

use std::sync::Arc;

use super::sparse::{axpy, dot, SparseOperator, TripletBuilder};
use super::LinearOperator;
use crate::error::{Error, Result};
use crate::mesh::{BoundaryField, BulkField, Grid};

/// Relative size of the mean that still counts as zero.
pub const MEAN_ZERO_RTOL: f64 = 1e-10;

const CG_TOL: f64 = 1e-13;

fn check_mean_zero(mean: f64, scale: f64) -> Result<()> {
    if mean.abs() > MEAN_ZERO_RTOL * scale.max(f64::MIN_POSITIVE) {
        Err(Error::MeanNotZero { mean })
    } else {
        Ok(())
    }
}

/// Cached solver for `-L w = u` with the mirrored Neumann Laplacian `L`.
///
/// Works on the symmetric form `K w = W u`, `K = -W L` (the edge stiffness
/// matrix), with Jacobi-preconditioned conjugate gradients. Iterates stay
/// orthogonal to the constant nullspace.
#[derive(Debug, Clone)]
pub struct NeumannPoisson {
    grid: Arc<Grid>,
    stiffness: SparseOperator,
    weights: Vec<f64>,
    inv_diag: Vec<f64>,
}

impl NeumannPoisson {
    pub fn new(grid: &Arc<Grid>) -> Result<Self> {
        let n = grid.num_nodes();
        let mut b = TripletBuilder::with_capacity(n, 4 * grid.num_nodes() * 2);
        for (a, c, w) in grid.edges() {
            b.push(a, a, w);
            b.push(c, c, w);
            b.push(a, c, -w);
            b.push(c, a, -w);
        }
        let stiffness = b.build()?;
        let inv_diag = stiffness.diagonal().iter().map(|d| 1.0 / d).collect();
        Ok(NeumannPoisson { grid: Arc::clone(grid), stiffness, weights: grid.weights(), inv_diag })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Solves for the mean-zero `w` with `-L w = u`.
    pub fn solve(&self, u: &[f64]) -> Result<Vec<f64>> {
        let n = self.grid.num_nodes();
        if u.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: u.len() });
        }
        let area = self.grid.area();
        let mean = dot(&self.weights, u) / area;
        let scale = dot(&self.weights, &u.iter().map(|v| v.abs()).collect::<Vec<_>>()) / area;
        check_mean_zero(mean, scale)?;

        // b = W (u - mean); the projection removes the tolerated residual mean
        let b: Vec<f64> = u.iter().zip(&self.weights).map(|(ui, wi)| wi * (ui - mean)).collect();
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut x = vec![0.0; n];
        if bnorm == 0.0 {
            return Ok(x);
        }
        let mut r = b;
        project_out_constants(&mut r);
        let mut z: Vec<f64> = r.iter().zip(&self.inv_diag).map(|(a, d)| a * d).collect();
        let mut p = z.clone();
        let mut q = vec![0.0; n];
        let mut rz = dot(&r, &z);
        let max_iter = 10 * n;
        let mut converged = false;
        for _ in 0..max_iter {
            self.stiffness.apply(&p, &mut q);
            let pq = dot(&p, &q);
            if pq <= 0.0 {
                break;
            }
            let alpha = rz / pq;
            axpy(&mut x, alpha, &p);
            axpy(&mut r, -alpha, &q);
            project_out_constants(&mut r);
            let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if rnorm <= CG_TOL * bnorm {
                converged = true;
                break;
            }
            for ((zi, ri), di) in z.iter_mut().zip(&r).zip(&self.inv_diag) {
                *zi = ri * di;
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta * *pi;
            }
        }
        if !converged {
            let mut kx = vec![0.0; n];
            self.stiffness.apply(&x, &mut kx);
            let b2: Vec<f64> = u.iter().zip(&self.weights).map(|(ui, wi)| wi * (ui - mean)).collect();
            let res = kx.iter().zip(&b2).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt() / bnorm;
            if res > 1e-10 {
                return Err(Error::NotConverged { iterations: max_iter, residual: res });
            }
        }
        let xm = dot(&self.weights, &x) / area;
        x.iter_mut().for_each(|v| *v -= xm);
        Ok(x)
    }
}

/// Keeps a CG residual in the range of the stiffness matrix (plain-sum zero);
/// rounding otherwise feeds the constant nullspace and stalls the iteration.
fn project_out_constants(r: &mut [f64]) {
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    r.iter_mut().for_each(|v| *v -= mean);
}

/// Mean-zero solution of `-L w = u`, `L` the mirrored Neumann Laplacian.
pub fn neumann_poisson_inverse(u: &BulkField) -> Result<BulkField> {
    let solver = NeumannPoisson::new(u.grid())?;
    let w = solver.solve(u.values())?;
    BulkField::from_values(u.grid(), w)
}

/// Mean-zero solution of `-D w = v` with `D` the periodic loop second difference.
pub fn loop_poisson_inverse(v: &BoundaryField) -> Result<BoundaryField> {
    let w = loop_poisson_solve(v.grid().h(), v.values())?;
    BoundaryField::from_values(v.grid(), w)
}

/// Slice version of [`loop_poisson_inverse`].
///
/// With `d_k = w_{k+1} - w_k` the equations read `d_k - d_{k-1} = -h^2 v_k`,
/// so the differences follow by a running sum; periodicity fixes `d_0`
/// through `sum_k d_k = 0`.
pub fn loop_poisson_solve(h: f64, v: &[f64]) -> Result<Vec<f64>> {
    let m = v.len();
    let mean = v.iter().sum::<f64>() / m as f64;
    let scale = v.iter().map(|x| x.abs()).sum::<f64>() / m as f64;
    check_mean_zero(mean, scale)?;
    let h2 = h * h;
    // s_k = d_k - d_0 = -h^2 sum_{j=1..k} (v_j - mean)
    let mut s = vec![0.0; m];
    for k in 1..m {
        s[k] = s[k - 1] - h2 * (v[k] - mean);
    }
    let d0 = -s.iter().sum::<f64>() / m as f64;
    let mut w = vec![0.0; m];
    for k in 1..m {
        w[k] = w[k - 1] + d0 + s[k - 1];
    }
    let wm = w.iter().sum::<f64>() / m as f64;
    w.iter_mut().for_each(|x| *x -= wm);
    Ok(w)
}
