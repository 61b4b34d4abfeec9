//! Restarted GMRES with right preconditioning.
//!
//! Right preconditioning keeps the Arnoldi residual equal to the true residual
//! of the original system, so the convergence test and the reported residual
//! refer to `||b - A x|| / ||b||` directly.

use std::time::{Duration, Instant};

use super::banded::BandedLu;
use super::sparse::{axpy, dot, norm2, LinearOperator};
use crate::error::{Error, Result};

/// Outcome of an iterative solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Final `||b - A x|| / ||b||` (zero for a zero right-hand side).
    pub residual: f64,
    pub converged: bool,
    pub wall_time: Duration,
    /// True relative residual at the start and after every restart cycle.
    pub residual_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    pub tol: f64,
    pub restart: usize,
    /// Total inner-iteration cap; `None` means `10 * dim`.
    pub max_iterations: Option<usize>,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions { tol: 1e-10, restart: 50, max_iterations: None }
    }
}

/// Approximate inverse applied as `z = M^{-1} r`.
pub trait Preconditioner {
    fn apply_inverse(&self, r: &[f64], z: &mut [f64]);
}

pub struct Identity;

impl Preconditioner for Identity {
    fn apply_inverse(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Diagonal scaling; zero diagonal entries are left unscaled.
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(diag: &[f64]) -> Self {
        let inv_diag = diag.iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect();
        Jacobi { inv_diag }
    }
}

impl Preconditioner for Jacobi {
    fn apply_inverse(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
    }
}

impl Preconditioner for BandedLu {
    fn apply_inverse(&self, r: &[f64], z: &mut [f64]) {
        self.solve(r, z);
    }
}

/// Unpreconditioned restarted GMRES.
pub fn gmres(
    op: &dyn LinearOperator,
    rhs: &[f64],
    x0: &[f64],
    tol: f64,
    restart: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    let opts = GmresOptions { tol, restart, max_iterations: None };
    gmres_preconditioned(op, &Identity, rhs, x0, &opts)
}

pub fn gmres_preconditioned(
    op: &dyn LinearOperator,
    precond: &dyn Preconditioner,
    rhs: &[f64],
    x0: &[f64],
    opts: &GmresOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let started = Instant::now();
    let n = op.dim();
    if rhs.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: rhs.len() });
    }
    if x0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x0.len() });
    }
    if !(opts.tol > 0.0) {
        return Err(Error::param("solver.tol", "must be positive"));
    }
    let restart = opts.restart.clamp(1, n.max(1));
    let max_iterations = opts.max_iterations.unwrap_or(10 * n);

    let bnorm = norm2(rhs);
    if bnorm == 0.0 {
        let report = SolveReport {
            iterations: 0,
            residual: 0.0,
            converged: true,
            wall_time: started.elapsed(),
            residual_history: vec![0.0],
        };
        return Ok((vec![0.0; n], report));
    }
    if !bnorm.is_finite() {
        return Err(Error::NonFinite { what: "gmres right-hand side", index: 0 });
    }

    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    let residual_of = |x: &[f64], r: &mut [f64]| {
        op.apply(x, r);
        for (ri, bi) in r.iter_mut().zip(rhs) {
            *ri = bi - *ri;
        }
        norm2(r)
    };
    let mut beta = residual_of(&x, &mut r);
    let mut history = vec![beta / bnorm];
    let mut iterations = 0;

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(restart + 1);
    // Hessenberg columns, already rotated into upper-triangular form
    let mut hess: Vec<Vec<f64>> = Vec::with_capacity(restart);
    let mut cs = vec![0.0; restart];
    let mut sn = vec![0.0; restart];
    let mut g = vec![0.0; restart + 1];
    let mut z = vec![0.0; n];
    let mut w = vec![0.0; n];

    while beta / bnorm > opts.tol {
        if iterations >= max_iterations {
            return Err(Error::NotConverged { iterations, residual: beta / bnorm });
        }
        basis.clear();
        hess.clear();
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;
        basis.push(r.iter().map(|v| v / beta).collect());

        let mut cols = 0;
        for j in 0..restart {
            precond.apply_inverse(&basis[j], &mut z);
            op.apply(&z, &mut w);
            let mut h = vec![0.0; j + 2];
            for (i, v) in basis.iter().enumerate() {
                h[i] = dot(&w, v);
                axpy(&mut w, -h[i], v);
            }
            let hnext = norm2(&w);
            h[j + 1] = hnext;
            if !hnext.is_finite() || h.iter().any(|v| !v.is_finite()) {
                return Err(Error::Breakdown(format!("non-finite Arnoldi coefficient at iteration {iterations}")));
            }
            for i in 0..j {
                let t = cs[i] * h[i] + sn[i] * h[i + 1];
                h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
                h[i] = t;
            }
            let denom = h[j].hypot(h[j + 1]);
            if denom == 0.0 {
                return Err(Error::Breakdown(format!("singular Hessenberg at iteration {iterations}")));
            }
            cs[j] = h[j] / denom;
            sn[j] = h[j + 1] / denom;
            h[j] = denom;
            h[j + 1] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            hess.push(h);
            cols = j + 1;
            iterations += 1;

            let estimate = g[j + 1].abs() / bnorm;
            if estimate <= opts.tol || hnext <= f64::EPSILON * beta || iterations >= max_iterations {
                break;
            }
            basis.push(w.iter().map(|v| v / hnext).collect());
        }

        // back substitution for the least-squares coefficients
        let mut y = vec![0.0; cols];
        for i in (0..cols).rev() {
            let s: f64 = (i + 1..cols).map(|k| hess[k][i] * y[k]).sum();
            y[i] = (g[i] - s) / hess[i][i];
        }
        let mut update = vec![0.0; n];
        for (yi, v) in y.iter().zip(&basis) {
            axpy(&mut update, *yi, v);
        }
        precond.apply_inverse(&update, &mut z);
        axpy(&mut x, 1.0, &z);

        let new_beta = residual_of(&x, &mut r);
        if !new_beta.is_finite() {
            return Err(Error::Breakdown("non-finite residual".into()));
        }
        history.push(new_beta / bnorm);
        if new_beta >= beta && cols < restart && new_beta / bnorm > opts.tol {
            // Arnoldi ended early without progress: the Krylov space is exhausted
            return Err(Error::Breakdown(format!(
                "stagnation at relative residual {:e}",
                new_beta / bnorm
            )));
        }
        beta = new_beta;
    }

    let report = SolveReport {
        iterations,
        residual: beta / bnorm,
        converged: true,
        wall_time: started.elapsed(),
        residual_history: history,
    };
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::dense::dense_solve;
    use crate::solver::sparse::{SparseOperator, TripletBuilder};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag_dominant(n: usize, seed: u64) -> SparseOperator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = TripletBuilder::new(n);
        for i in 0..n {
            let mut row_sum = 0.0;
            for j in 0..n {
                if i != j && rng.random_bool(0.3) {
                    let v: f64 = rng.random_range(-1.0..1.0);
                    row_sum += v.abs();
                    b.push(i, j, v);
                }
            }
            b.push(i, i, row_sum + 1.0);
        }
        b.build().unwrap()
    }

    #[test]
    fn identity_converges_in_one_iteration() {
        let a = SparseOperator::identity(8);
        let b: Vec<f64> = (0..8).map(|i| i as f64 - 3.0).collect();
        let (x, rep) = gmres(&a, &b, &[0.0; 8], 1e-12, 50).unwrap();
        assert!(rep.iterations <= 1);
        assert!(rep.converged);
        for (p, q) in x.iter().zip(&b) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = diag_dominant(10, 1);
        let (x, rep) = gmres(&a, &[0.0; 10], &[1.0; 10], 1e-10, 5).unwrap();
        assert_eq!(rep.iterations, 0);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn diagonally_dominant_matches_dense_lu() {
        let n = 50;
        let a = diag_dominant(n, 3);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let (x, rep) = gmres(&a, &b, &vec![0.0; n], 1e-12, 10).unwrap();
        assert!(rep.converged && rep.residual <= 1e-12);
        let oracle = dense_solve(&a.to_dense(), &b).unwrap();
        for (p, q) in x.iter().zip(&oracle) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn residual_history_is_monotone_across_restarts() {
        let n = 60;
        let a = diag_dominant(n, 11);
        let b: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64).collect();
        let (_, rep) = gmres(&a, &b, &vec![0.0; n], 1e-13, 3).unwrap();
        assert!(rep.residual_history.len() > 2);
        for w in rep.residual_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", rep.residual_history);
        }
    }

    #[test]
    fn iteration_cap_reported() {
        let n = 40;
        let a = diag_dominant(n, 5);
        let b = vec![1.0; n];
        let opts = GmresOptions { tol: 1e-14, restart: 2, max_iterations: Some(3) };
        let err = gmres_preconditioned(&a, &Identity, &b, &vec![0.0; n], &opts).unwrap_err();
        assert!(matches!(err, Error::NotConverged { iterations: 3, .. }), "{err}");
    }

    #[test]
    fn exact_preconditioner_converges_immediately() {
        let n = 30;
        let a = diag_dominant(n, 9);
        let lu = BandedLu::factor(&a).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let (_, rep) =
            gmres_preconditioned(&a, &lu, &b, &vec![0.0; n], &GmresOptions::default()).unwrap();
        assert!(rep.iterations <= 2, "{rep:?}");
    }

    #[test]
    fn dimension_mismatch() {
        let a = SparseOperator::identity(3);
        assert!(gmres(&a, &[1.0; 2], &[0.0; 3], 1e-8, 5).is_err());
    }
}
