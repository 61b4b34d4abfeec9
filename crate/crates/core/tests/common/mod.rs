//! Test oracles built directly from the scheme equations, independent of the
//! sparse assembly in the library.

#![allow(dead_code)]

use std::sync::Arc;

use chdbc::mesh::{
    apply_dirichlet_laplacian, apply_laplace_beltrami, apply_neumann_laplacian, apply_normal_derivative,
    trace_values, BulkField, Grid,
};
use chdbc::scheme::StepState;
use chdbc::solver::dense::{dense_solve, DenseMatrix};
use chdbc::{Potential, SchemeParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    Bdf2,
    /// Backward Euler start-up: explicit `f(phi^0)`, `B` stabilizers only.
    FirstOrder,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Residual of one step written from the scheme equations.
///
/// Unknowns are `[phi | mu | mu_gamma]`. Rows: bulk transport at every node;
/// bulk chemical potential at interior nodes; boundary transport at perimeter
/// nodes; boundary chemical potential along the loop. For the start-up step
/// `s.phi_curr` holds `phi^0`.
pub fn step_residual(
    grid: &Grid,
    p: &SchemeParams,
    pot: &Potential,
    kind: Integrator,
    s: &StepState,
    z: &[f64],
) -> Vec<f64> {
    let n = grid.num_nodes();
    let m = grid.loop_len();
    let (phi, rest) = z.split_at(n);
    let (mu, mu_g) = rest.split_at(n);
    let phi_n = s.phi_curr.values();
    let phi_p = s.phi_prev.values();
    let psi = trace_values(grid, phi);
    let psi_n = s.psi_curr.values();
    let psi_p = s.psi_prev.values();

    let apply = |f: fn(&Grid, &[f64], &mut [f64]), u: &[f64], len: usize| {
        let mut out = vec![0.0; len];
        f(grid, u, &mut out);
        out
    };
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<f64>>();

    // time difference, extrapolation and B-stabilizer difference per integrator
    let (dt_bulk, hat_bulk, stab_bulk): (Vec<f64>, Vec<f64>, Vec<f64>) = match kind {
        Integrator::Bdf2 => (
            (0..n).map(|i| (1.5 * phi[i] - 2.0 * phi_n[i] + 0.5 * phi_p[i]) / p.tau).collect(),
            (0..n).map(|i| 2.0 * phi_n[i] - phi_p[i]).collect(),
            (0..n).map(|i| phi[i] - 2.0 * phi_n[i] + phi_p[i]).collect(),
        ),
        Integrator::FirstOrder => (
            (0..n).map(|i| (phi[i] - phi_n[i]) / p.tau).collect(),
            phi_n.to_vec(),
            (0..n).map(|i| phi[i] - phi_n[i]).collect(),
        ),
    };
    let (dt_loop, hat_loop, stab_loop): (Vec<f64>, Vec<f64>, Vec<f64>) = match kind {
        Integrator::Bdf2 => (
            (0..m).map(|k| (1.5 * psi[k] - 2.0 * psi_n[k] + 0.5 * psi_p[k]) / p.tau).collect(),
            (0..m).map(|k| 2.0 * psi_n[k] - psi_p[k]).collect(),
            (0..m).map(|k| psi[k] - 2.0 * psi_n[k] + psi_p[k]).collect(),
        ),
        Integrator::FirstOrder => (
            (0..m).map(|k| (psi[k] - psi_n[k]) / p.tau).collect(),
            psi_n.to_vec(),
            (0..m).map(|k| psi[k] - psi_n[k]).collect(),
        ),
    };
    let (a1t, a2t) = match kind {
        Integrator::Bdf2 => (p.a1 * p.tau, p.a2 * p.tau),
        Integrator::FirstOrder => (0.0, 0.0),
    };

    let lap_mu = apply(apply_neumann_laplacian, mu, n);
    let lap_phi = apply(apply_dirichlet_laplacian, phi, n);
    let lap_dphi = apply(apply_dirichlet_laplacian, &diff(phi, phi_n), n);
    let lap_g_mu = apply(apply_laplace_beltrami, mu_g, m);
    let lap_g_psi = apply(apply_laplace_beltrami, &psi, m);
    let lap_g_dpsi = apply(apply_laplace_beltrami, &diff(&psi, psi_n), m);
    let dn_phi = apply(apply_normal_derivative, phi, m);
    let dn_dphi = apply(apply_normal_derivative, &diff(phi, phi_n), m);

    let mut r = vec![0.0; 2 * n + m];
    for i in 0..n {
        r[i] = dt_bulk[i] - lap_mu[i];
        r[n + i] = match grid.loop_index(i) {
            None => {
                mu[i] + p.eps * lap_phi[i] - pot.bulk.derivative(hat_bulk[i]) / p.eps + a1t * lap_dphi[i]
                    - p.b1 * stab_bulk[i]
            }
            Some(k) => dt_loop[k] - lap_g_mu[k],
        };
    }
    for k in 0..m {
        r[2 * n + k] = mu_g[k] + p.delta * p.kappa * lap_g_psi[k] - pot.surface.derivative(hat_loop[k]) / p.delta
            - p.eps * dn_phi[k]
            + a2t * lap_g_dpsi[k]
            - p.b2 * stab_loop[k]
            - a1t * dn_dphi[k];
    }
    r
}

/// Solves the affine system `F(z) = 0` by dense LU on columns `F(e_j) - F(0)`.
pub fn dense_step(grid: &Grid, p: &SchemeParams, pot: &Potential, kind: Integrator, s: &StepState) -> Vec<f64> {
    let dim = 2 * grid.num_nodes() + grid.loop_len();
    let mut z = vec![0.0; dim];
    let f0 = step_residual(grid, p, pot, kind, s, &z);
    let mut a = DenseMatrix::zeros(dim);
    for j in 0..dim {
        z[j] = 1.0;
        let fj = step_residual(grid, p, pot, kind, s, &z);
        z[j] = 0.0;
        for i in 0..dim {
            *a.at_mut(i, j) = fj[i] - f0[i];
        }
    }
    let rhs: Vec<f64> = f0.iter().map(|v| -v).collect();
    dense_solve(&a, &rhs).unwrap()
}

/// Random two-level state whose levels share bulk and loop means.
pub fn random_admissible_state(grid: &Arc<Grid>, rng: &mut ChaCha8Rng) -> StepState {
    let n = grid.num_nodes();
    let curr: Vec<f64> = (0..n).map(|_| rng.random_range(-1.2..1.2)).collect();
    let mut d: Vec<f64> = (0..n).map(|_| rng.random_range(-0.2..0.2)).collect();
    let loop_mean = trace_values(grid, &d).iter().sum::<f64>() / grid.loop_len() as f64;
    for b in grid.boundary() {
        d[b.node] -= loop_mean;
    }
    let interior: Vec<usize> = (0..n).filter(|&i| !grid.is_boundary(i)).collect();
    let weighted: f64 = (0..n).map(|i| grid.weight(i) * d[i]).sum();
    let interior_weight: f64 = interior.iter().map(|&i| grid.weight(i)).sum();
    for &i in &interior {
        d[i] -= weighted / interior_weight;
    }
    let prev = curr.iter().zip(&d).map(|(c, e)| c - e).collect();
    StepState::new(BulkField::from_values(grid, prev).unwrap(), BulkField::from_values(grid, curr).unwrap(), 1)
        .unwrap()
}

pub fn random_params(rng: &mut ChaCha8Rng) -> SchemeParams {
    SchemeParams {
        eps: rng.random_range(0.05..1.0),
        delta: rng.random_range(0.05..1.0),
        kappa: rng.random_range(0.1..2.0),
        a1: rng.random_range(0.0..10.0),
        a2: rng.random_range(0.0..10.0),
        b1: rng.random_range(0.0..20.0),
        b2: rng.random_range(0.0..20.0),
        tau: rng.random_range(1e-4..1e-2),
        t_final: 1.0,
        ..SchemeParams::default()
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
