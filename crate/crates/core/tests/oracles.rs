//! Library results against dense recomputations from first principles.

use std::sync::Arc;

use chdbc::diagnostics::modified_energy;
use chdbc::mesh::{apply_laplace_beltrami, apply_neumann_laplacian, trace, BulkField, Grid};
use chdbc::scheme::{PreconditionerKind, SolverSettings, Stepper};
use chdbc::solver::{dense_solve, DenseMatrix};
use chdbc::{Potential, SchemeParams};
use rand::Rng;

mod common;
use common::{dense_step, max_abs_diff, random_admissible_state, random_params, rng, Integrator};

#[test]
fn bootstrap_matches_dense_first_order_solve() {
    let grid = Arc::new(Grid::square(4, 1.0).unwrap());
    let mut r = rng(11);
    for _ in 0..10 {
        let params = random_params(&mut r);
        let values = (0..grid.num_nodes()).map(|_| r.random_range(-1.0..1.0)).collect();
        let phi0 = BulkField::from_values(&grid, values).unwrap();
        let state0 = chdbc::StepState::steady(phi0.clone()).unwrap();
        let expected = dense_step(&grid, &params, &Potential::double_well(), Integrator::FirstOrder, &state0);
        let stepper = Stepper::new(&grid, params, Potential::double_well(), SolverSettings::default()).unwrap();
        let out = stepper.bootstrap(&phi0, &trace(&phi0)).unwrap();
        let got = [out.state.phi_curr.values(), out.mu.values(), out.mu_gamma.values()].concat();
        let err = max_abs_diff(&got, &expected);
        assert!(err <= 1e-10, "bootstrap differs from dense solve by {err:e}");
        assert_eq!(out.state.phi_prev, phi0);
    }
}

#[test]
fn bdf2_matches_dense_solve_for_every_preconditioner() {
    let grid = Arc::new(Grid::square(6, 1.0).unwrap());
    let dim = 2 * grid.num_nodes() + grid.loop_len();
    let mut r = rng(12);
    for _ in 0..10 {
        let params = random_params(&mut r);
        let pot = Potential::modified_double_well();
        let state = random_admissible_state(&grid, &mut r);
        let expected = dense_step(&grid, &params, &pot, Integrator::Bdf2, &state);
        for preconditioner in [PreconditionerKind::BandedLu, PreconditionerKind::Jacobi, PreconditionerKind::None] {
            let settings = SolverSettings { tol: 1e-14, restart: dim, max_iterations: None, preconditioner };
            let out = Stepper::new(&grid, params, pot, settings).unwrap().step(&state).unwrap();
            let got = [out.state.phi_curr.values(), out.mu.values(), out.mu_gamma.values()].concat();
            let err = max_abs_diff(&got, &expected);
            assert!(err <= 1e-10, "{preconditioner:?}: difference {err:e}");
        }
    }
}

/// Columns of a linear kernel as a dense matrix.
fn dense_of(dim: usize, apply: impl Fn(&[f64], &mut [f64])) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(dim);
    let mut e = vec![0.0; dim];
    let mut col = vec![0.0; dim];
    for j in 0..dim {
        e[j] = 1.0;
        apply(&e, &mut col);
        e[j] = 0.0;
        for i in 0..dim {
            *m.at_mut(i, j) = col[i];
        }
    }
    m
}

/// Squared H^-1 norm through a bordered dense solve of `-L w = u, (c, w) = 0`.
fn dense_hminus1_squared(neg_lap: &DenseMatrix, weights: &[f64], u: &[f64]) -> f64 {
    let n = u.len();
    let mut rows = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            rows[i][j] = -neg_lap.at(i, j);
        }
        rows[i][n] = 1.0;
        rows[n][i] = weights[i];
    }
    let a = DenseMatrix::from_rows(&rows).unwrap();
    let mut rhs = u.to_vec();
    rhs.push(0.0);
    let w = dense_solve(&a, &rhs).unwrap();
    (0..n).map(|i| weights[i] * u[i] * w[i]).sum()
}

fn centered(weights: &[f64], u: Vec<f64>) -> Vec<f64> {
    let mean = weights.iter().zip(&u).map(|(w, v)| w * v).sum::<f64>() / weights.iter().sum::<f64>();
    u.into_iter().map(|v| v - mean).collect()
}

#[test]
fn modified_energy_matches_term_by_term_recomputation() {
    let grid = Arc::new(Grid::square(7, 2.0).unwrap());
    let n = grid.num_nodes();
    let m = grid.loop_len();
    let h = grid.h();
    let weights = grid.weights();
    let lap = dense_of(n, |u, out| apply_neumann_laplacian(&grid, u, out));
    let lap_g = dense_of(m, |v, out| apply_laplace_beltrami(&grid, v, out));
    let mut r = rng(13);
    for pot in [Potential::modified_double_well(), Potential::double_well()] {
        for _ in 0..5 {
            let p = SchemeParams { b1: 3.0, b2: 5.0, ..random_params(&mut r) };
            let s = random_admissible_state(&grid, &mut r);
            let phi = s.phi_curr.values();
            let psi = s.psi_curr.values();

            let lphi = lap.mul_vec(phi);
            let grad_bulk: f64 = -(0..n).map(|i| weights[i] * phi[i] * lphi[i]).sum::<f64>();
            let lpsi = lap_g.mul_vec(psi);
            let grad_loop: f64 = -h * psi.iter().zip(&lpsi).map(|(a, b)| a * b).sum::<f64>();
            let e_bulk = 0.5 * p.eps * grad_bulk
                + (0..n).map(|i| weights[i] * pot.bulk.value(phi[i])).sum::<f64>() / p.eps;
            let e_surf = 0.5 * p.delta * p.kappa * grad_loop
                + h * psi.iter().map(|&v| pot.surface.value(v)).sum::<f64>() / p.delta;

            let dphi = centered(&weights, s.phi_increment());
            let loop_weights = vec![h; m];
            let dpsi = centered(&loop_weights, s.psi_increment());
            let hm_phi = dense_hminus1_squared(&lap, &weights, &dphi);
            let hm_psi = dense_hminus1_squared(&lap_g, &loop_weights, &dpsi);
            let l2_phi: f64 = (0..n).map(|i| weights[i] * dphi[i] * dphi[i]).sum();
            let l2_psi: f64 = h * dpsi.iter().map(|v| v * v).sum::<f64>();
            let (l1, l2) = (pot.l1().unwrap_or(0.0), pot.l2().unwrap_or(0.0));
            let expected = e_bulk
                + e_surf
                + (hm_phi + hm_psi) / (4.0 * p.tau)
                + (l1 / (2.0 * p.eps) + p.b1 / 2.0) * l2_phi
                + (l2 / (2.0 * p.delta) + p.b2 / 2.0) * l2_psi;

            let got = modified_energy(&s, &p, &pot).unwrap();
            assert!((got - expected).abs() <= 1e-10 * expected.abs().max(1.0), "{got} vs {expected}");
        }
    }
}
