//! Energies, masses, H^-1 norms and convergence bookkeeping.
//!
//! Bulk integrals use the tensor trapezoid rule on nodes, loop integrals the
//! periodic trapezoid rule (plain sum times `h`). The bulk gradient energy is
//! the edge sum `sum_e c_e (phi_a - phi_b)^2` with `c_e = 1/2` on perimeter
//! edges, which is the quadratic form of the mirrored Neumann Laplacian.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{trace, BoundaryField, BulkField, Grid};
use crate::potential::Potential;
use crate::scheme::{SchemeParams, StepState};
use crate::solver::poisson::{loop_poisson_solve, MEAN_ZERO_RTOL};
use crate::solver::NeumannPoisson;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub e_bulk: f64,
    pub e_surf: f64,
    pub e_total: f64,
    /// Present only when history terms were evaluated.
    pub e_modified: Option<f64>,
}

/// `sum_e c_e (u_a - u_b)^2`, an approximation of `int |grad u|^2`.
pub fn bulk_dirichlet_form(grid: &Grid, u: &[f64]) -> f64 {
    grid.edges().map(|(a, b, w)| w * (u[a] - u[b]).powi(2)).sum()
}

/// `sum_k (v_{k+1} - v_k)^2 / h`, an approximation of `int |d v / ds|^2`.
pub fn loop_dirichlet_form(h: f64, v: &[f64]) -> f64 {
    let m = v.len();
    (0..m).map(|k| (v[(k + 1) % m] - v[k]).powi(2)).sum::<f64>() / h
}

/// Trapezoid-weighted `(u, v)` over the domain.
pub fn bulk_inner(grid: &Grid, u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).enumerate().map(|(n, (a, b))| grid.weight(n) * a * b).sum()
}

/// `h * sum_k u_k v_k` over the loop.
pub fn loop_inner(h: f64, u: &[f64], v: &[f64]) -> f64 {
    h * u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
}

pub fn l2_norm_bulk(grid: &Grid, u: &[f64]) -> f64 {
    bulk_inner(grid, u, u).sqrt()
}

pub fn l2_norm_loop(h: f64, v: &[f64]) -> f64 {
    loop_inner(h, v, v).sqrt()
}

fn check_trace(phi: &BulkField, psi: &BoundaryField) -> Result<()> {
    psi.check_grid(phi.grid())?;
    if trace(phi) != *psi {
        return Err(Error::Invariant { step: 0, message: "psi is not the trace of phi".into() });
    }
    Ok(())
}

/// Ginzburg-Landau energies of a trace-compatible pair.
pub fn total_energy(
    phi: &BulkField,
    psi: &BoundaryField,
    params: &SchemeParams,
    pot: &Potential,
) -> Result<EnergyBreakdown> {
    check_trace(phi, psi)?;
    let grid = phi.grid();
    let u = phi.values();
    let bulk_pot: f64 = u.iter().enumerate().map(|(n, &v)| grid.weight(n) * pot.bulk.value(v)).sum();
    let e_bulk = 0.5 * params.eps * bulk_dirichlet_form(grid, u) + bulk_pot / params.eps;
    let v = psi.values();
    let h = grid.h();
    let surf_pot: f64 = h * v.iter().map(|&s| pot.surface.value(s)).sum::<f64>();
    let e_surf = 0.5 * params.delta * params.kappa * loop_dirichlet_form(h, v) + surf_pot / params.delta;
    Ok(EnergyBreakdown { e_bulk, e_surf, e_total: e_bulk + e_surf, e_modified: None })
}

/// `(int phi, int psi dS)`.
pub fn masses(phi: &BulkField, psi: &BoundaryField) -> (f64, f64) {
    let grid = phi.grid();
    let bulk = phi.values().iter().enumerate().map(|(n, v)| grid.weight(n) * v).sum();
    let bdry = grid.h() * psi.values().iter().sum::<f64>();
    (bulk, bdry)
}

pub fn hminus1_norm_bulk(u: &BulkField) -> Result<f64> {
    let solver = NeumannPoisson::new(u.grid())?;
    hminus1_bulk_with(&solver, u.values())
}

pub fn hminus1_norm_loop(v: &BoundaryField) -> Result<f64> {
    hminus1_loop_values(v.grid().h(), v.values())
}

fn hminus1_bulk_with(solver: &NeumannPoisson, u: &[f64]) -> Result<f64> {
    let w = solver.solve(u)?;
    Ok(bulk_inner(solver.grid(), u, &w).max(0.0).sqrt())
}

fn hminus1_loop_values(h: f64, v: &[f64]) -> Result<f64> {
    let w = loop_poisson_solve(h, v)?;
    Ok(loop_inner(h, v, &w).max(0.0).sqrt())
}

/// Curvature bounds entering the modified energy; undeclared bounds count as zero.
fn curvature_bounds(pot: &Potential) -> (f64, f64) {
    (pot.l1().unwrap_or(0.0), pot.l2().unwrap_or(0.0))
}

/// Evaluates total and modified energies along a run, reusing the Poisson solver.
pub struct EnergyMonitor {
    poisson: NeumannPoisson,
    params: SchemeParams,
    pot: Potential,
}

impl EnergyMonitor {
    pub fn new(grid: &Arc<Grid>, params: SchemeParams, pot: Potential) -> Result<Self> {
        Ok(EnergyMonitor { poisson: NeumannPoisson::new(grid)?, params, pot })
    }

    pub fn evaluate(&self, state: &StepState) -> Result<EnergyBreakdown> {
        let mut e = total_energy(&state.phi_curr, &state.psi_curr, &self.params, &self.pot)?;
        e.e_modified = Some(e.e_total + self.history_terms(state)?);
        Ok(e)
    }

    fn history_terms(&self, state: &StepState) -> Result<f64> {
        let p = &self.params;
        let grid = state.grid();
        let h = grid.h();
        let phi_scale = mean_abs(grid.weights().iter().copied(), state.phi_curr.values())
            .max(mean_abs(grid.weights().iter().copied(), state.phi_prev.values()))
            .max(1.0);
        let dphi = centered(grid.weights().iter().copied(), state.phi_increment(), phi_scale)?;
        let psi_scale = mean_abs(std::iter::repeat(1.0), state.psi_curr.values())
            .max(mean_abs(std::iter::repeat(1.0), state.psi_prev.values()))
            .max(1.0);
        let dpsi = centered(std::iter::repeat(1.0), state.psi_increment(), psi_scale)?;
        if dphi.iter().all(|&v| v == 0.0) && dpsi.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        let (l1, l2) = curvature_bounds(&self.pot);
        let hm_phi = hminus1_bulk_with(&self.poisson, &dphi)?;
        let hm_psi = hminus1_loop_values(h, &dpsi)?;
        let l2_phi = bulk_inner(grid, &dphi, &dphi);
        let l2_psi = loop_inner(h, &dpsi, &dpsi);
        Ok((hm_phi * hm_phi + hm_psi * hm_psi) / (4.0 * p.tau)
            + (l1 / (2.0 * p.eps) + p.b1 / 2.0) * l2_phi
            + (l2 / (2.0 * p.delta) + p.b2 / 2.0) * l2_psi)
    }
}

fn mean_abs(w: impl Iterator<Item = f64>, u: &[f64]) -> f64 {
    let (s, t) = w.zip(u).fold((0.0, 0.0), |(s, t), (w, v)| (s + w * v.abs(), t + w));
    s / t
}

/// Removes the mean of an increment after checking it is conservation-level small
/// relative to the fields it came from.
fn centered(w: impl Iterator<Item = f64> + Clone, mut u: Vec<f64>, scale: f64) -> Result<Vec<f64>> {
    let (s, t) = w.zip(&u).fold((0.0, 0.0), |(s, t), (w, v)| (s + w * v, t + w));
    let mean = s / t;
    if mean.abs() > MEAN_ZERO_RTOL * scale {
        return Err(Error::MeanNotZero { mean });
    }
    u.iter_mut().for_each(|v| *v -= mean);
    Ok(u)
}

/// Modified energy of a two-level state.
pub fn modified_energy(state: &StepState, params: &SchemeParams, pot: &Potential) -> Result<f64> {
    let monitor = EnergyMonitor::new(state.grid(), *params, *pot)?;
    Ok(monitor.evaluate(state)?.e_modified.unwrap_or(f64::NAN))
}

/// Error of a coarse-step solution against the reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRecord {
    pub tau: f64,
    /// `||e_phi||_Omega + ||e_psi||_Gamma`.
    pub error: f64,
    pub phi_l2: f64,
    pub psi_l2: f64,
    pub phi_hminus1: Option<f64>,
    pub phi_h1: Option<f64>,
}

impl ErrorRecord {
    pub fn new(tau: f64, phi: &BulkField, reference: &BulkField) -> Result<Self> {
        phi.check_grid(reference.grid())?;
        let grid = phi.grid();
        let e: Vec<f64> = phi.values().iter().zip(reference.values()).map(|(a, b)| a - b).collect();
        let e_psi = crate::mesh::trace_values(grid, &e);
        let phi_l2 = l2_norm_bulk(grid, &e);
        let psi_l2 = l2_norm_loop(grid.h(), &e_psi);
        // both runs conserve the same mass; remove the solver-level residue before inverting
        let mean = e.iter().enumerate().map(|(n, v)| grid.weight(n) * v).sum::<f64>() / grid.area();
        let centered: Vec<f64> = e.iter().map(|v| v - mean).collect();
        let phi_hminus1 = NeumannPoisson::new(grid).and_then(|s| hminus1_bulk_with(&s, &centered)).ok();
        let phi_h1 = Some((phi_l2 * phi_l2 + bulk_dirichlet_form(grid, &e)).sqrt());
        let rec = ErrorRecord { tau, error: phi_l2 + psi_l2, phi_l2, psi_l2, phi_hminus1, phi_h1 };
        if !rec.error.is_finite() {
            return Err(Error::NonFinite { what: "convergence error", index: 0 });
        }
        Ok(rec)
    }
}

/// Least-squares slope of `log(error)` against `log(tau)`.
pub fn fit_slope(records: &[ErrorRecord]) -> Result<f64> {
    if records.len() < 2 {
        return Err(Error::param("convergence.taus", "need at least two step sizes"));
    }
    if let Some(r) = records.iter().find(|r| !(r.error > 0.0 && r.tau > 0.0)) {
        return Err(Error::param("convergence", format!("non-positive error {} at tau {}", r.error, r.tau)));
    }
    let pts: Vec<(f64, f64)> = records.iter().map(|r| (r.tau.ln(), r.error.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::param("convergence.taus", "step sizes must differ"));
    }
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceResult {
    pub tau_ref: f64,
    pub records: Vec<ErrorRecord>,
    pub slope: f64,
}

/// Runs `solve(tau)` for the reference and every coarse step, then fits the order.
///
/// `solve` must return the solution at a common final time on a common grid.
pub fn convergence_study<F>(taus: &[f64], tau_ref: f64, mut solve: F) -> Result<ConvergenceResult>
where
    F: FnMut(f64) -> Result<BulkField>,
{
    if let Some(&t) = taus.iter().find(|&&t| t <= tau_ref) {
        return Err(Error::param("convergence.tau_ref", format!("must be smaller than every tau, got tau = {t}")));
    }
    let reference = solve(tau_ref)?;
    let mut records = Vec::with_capacity(taus.len());
    for &tau in taus {
        let phi = solve(tau)?;
        let rec = ErrorRecord::new(tau, &phi, &reference)?;
        log::info!("tau = {tau:e}: error = {:e}", rec.error);
        records.push(rec);
    }
    let slope = fit_slope(&records)?;
    Ok(ConvergenceResult { tau_ref, records, slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Density;
    use std::f64::consts::PI;

    fn unit(n: usize) -> Arc<Grid> {
        Arc::new(Grid::square(n, 1.0).unwrap())
    }

    fn unit_params() -> SchemeParams {
        SchemeParams { eps: 1.0, delta: 1.0, kappa: 1.0, ..SchemeParams::default() }
    }

    #[test]
    fn wells_have_zero_energy() {
        let g = unit(9);
        for c in [1.0, -1.0] {
            let phi = BulkField::constant(&g, c);
            let e = total_energy(&phi, &trace(&phi), &SchemeParams::default(), &Potential::double_well()).unwrap();
            assert_eq!(e.e_total, 0.0);
        }
    }

    #[test]
    fn constant_zero_field_energy() {
        let g = unit(11);
        let phi = BulkField::zeros(&g);
        let p = SchemeParams { eps: 1.0, delta: 0.5, kappa: 3.0, ..SchemeParams::default() };
        let e = total_energy(&phi, &trace(&phi), &p, &Potential::double_well()).unwrap();
        assert!((e.e_bulk - 0.25).abs() < 1e-14);
        assert!((e.e_surf - 4.0 * 0.25 / 0.5).abs() < 1e-13);
        assert!((e.e_total - e.e_bulk - e.e_surf).abs() < 1e-15);
    }

    #[test]
    fn trace_mismatch_rejected() {
        let g = unit(6);
        let phi = BulkField::zeros(&g);
        let psi = BoundaryField::constant(&g, 1.0);
        assert!(total_energy(&phi, &psi, &unit_params(), &Potential::double_well()).is_err());
    }

    #[test]
    fn energy_converges_to_quadrature_oracle() {
        // eps = 1: 1/2 * 8 pi^2 + int (phi^2 - 1)^2 / 4 = 4 pi^2 + 41/256
        let exact = 4.0 * PI * PI + 41.0 / 256.0;
        let err = |n: usize| {
            let g = unit(n);
            let phi = BulkField::from_fn(&g, |x, y| (4.0 * PI * x).sin() * (4.0 * PI * y).cos());
            let e = total_energy(&phi, &trace(&phi), &unit_params(), &Potential::double_well()).unwrap();
            (e.e_bulk - exact).abs()
        };
        let (e1, e2, e3) = (err(33), err(65), err(129));
        assert!(e3 < e2 && e2 < e1);
        let order = (e2 / e3).log2();
        assert!(order > 1.8, "order {order} ({e1:e}, {e2:e}, {e3:e})");
    }

    #[test]
    fn masses_of_constants() {
        let g = Arc::new(Grid::new(9, 5, 2.0, 1.0).unwrap());
        let phi = BulkField::constant(&g, 0.5);
        let psi = BoundaryField::constant(&g, -2.0);
        let (mb, ms) = masses(&phi, &psi);
        assert!((mb - 0.5 * 2.0).abs() < 1e-14);
        assert!((ms + 2.0 * 6.0).abs() < 1e-13);
    }

    #[test]
    fn case1_initial_mass_is_small() {
        for n in [20, 21, 64] {
            let g = unit(n);
            let phi = BulkField::from_fn(&g, |x, _| if x > 0.5 { 1.0 } else { -1.0 });
            let (mb, _) = masses(&phi, &trace(&phi));
            assert!(mb.abs() <= g.h() * (1.0 + 1e-12), "n = {n}: {mb}");
        }
    }

    #[test]
    fn hminus1_of_cosine() {
        let g = unit(65);
        let u = BulkField::from_fn(&g, |x, _| (PI * x).cos());
        let v = hminus1_norm_bulk(&u).unwrap();
        assert!((v - 1.0 / (PI * 2f64.sqrt())).abs() < 1e-3, "{v}");
        assert_eq!(hminus1_norm_bulk(&BulkField::zeros(&g)).unwrap(), 0.0);
        let shifted = BulkField::from_fn(&g, |x, _| (PI * x).cos() + 0.2);
        assert!(matches!(hminus1_norm_bulk(&shifted), Err(Error::MeanNotZero { .. })));
    }

    #[test]
    fn hminus1_loop_sine_mode() {
        let g = unit(33);
        let p = g.perimeter();
        let v = BoundaryField::from_arc_fn(&g, |s| (2.0 * PI * s / p).sin());
        // ||v||_{-1}^2 = (P / 2 pi)^2 ||v||^2 and ||v||^2 = P / 2
        let expected = (p / (2.0 * PI)) * (p / 2.0).sqrt();
        assert!((hminus1_norm_loop(&v).unwrap() - expected).abs() < 1e-3 * expected);
    }

    #[test]
    fn steady_modified_energy_equals_total() {
        let g = unit(8);
        let phi = BulkField::from_fn(&g, |x, y| 0.3 * x - 0.1 * y);
        let state = StepState::steady(phi.clone()).unwrap();
        let p = SchemeParams { b1: 7.0, b2: 3.0, ..SchemeParams::default() };
        let pot = Potential::modified_double_well();
        let e = total_energy(&phi, &trace(&phi), &p, &pot).unwrap();
        assert_eq!(modified_energy(&state, &p, &pot).unwrap(), e.e_total);
    }

    #[test]
    fn modified_energy_dominates_total() {
        let g = unit(8);
        let a = BulkField::from_fn(&g, |x, y| (PI * x).cos() * (PI * y).cos());
        let b = BulkField::from_fn(&g, |x, y| 0.9 * (PI * x).cos() * (PI * y).cos());
        let state = StepState::new(a, b.clone(), 1).unwrap();
        let pot = Potential::new(Density::ModifiedDoubleWell, Density::ModifiedDoubleWell);
        let p = SchemeParams::default();
        let e = total_energy(&b, &trace(&b), &p, &pot).unwrap();
        assert!(modified_energy(&state, &p, &pot).unwrap() > e.e_total);
    }

    fn synthetic(taus: &[f64], f: impl Fn(f64) -> f64) -> Vec<ErrorRecord> {
        taus.iter()
            .map(|&tau| ErrorRecord { tau, error: f(tau), phi_l2: f(tau), psi_l2: 0.0, phi_hminus1: None, phi_h1: None })
            .collect()
    }

    #[test]
    fn slope_of_synthetic_errors() {
        let taus = [4e-3, 2e-3, 1e-3, 5e-4];
        assert!((fit_slope(&synthetic(&taus, |t| 3.0 * t * t)).unwrap() - 2.0).abs() < 1e-12);
        assert!((fit_slope(&synthetic(&taus, |t| 0.5 * t)).unwrap() - 1.0).abs() < 1e-12);
        assert!(fit_slope(&synthetic(&taus[..1], |t| t)).is_err());
    }
}
