//! Stabilized linear BDF2 time stepper.
//!
//! Each step solves one constant-coefficient linear system in the unknowns
//! `z = [phi (all nodes) | mu (all nodes) | mu_Gamma (loop)]`. The boundary
//! value `psi` is the perimeter part of `phi`, so the trace constraint holds
//! by construction. Rows are laid out as
//!
//! * `0..N`: bulk transport `(c/tau) phi - L_N mu = ...` at every node,
//! * `N..2N`: bulk chemical potential at interior nodes, surface transport
//!   `(c/tau) psi - D mu_Gamma = ...` at perimeter nodes,
//! * `2N..2N+M`: surface chemical potential on the loop,
//!
//! with `c = 3/2` for BDF2 and `c = 1` for the first-order start-up step.
//! Nonlinear terms are evaluated at the extrapolation `2 phi^n - phi^{n-1}`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{
    apply_dirichlet_laplacian, apply_laplace_beltrami, apply_normal_derivative, trace, trace_values,
    BoundaryField, BulkField, Grid,
};
use crate::potential::Potential;
use crate::solver::gmres::{Identity, Jacobi};
use crate::solver::{gmres_preconditioned, BandedLu, GmresOptions, Preconditioner, SolveReport};
use crate::solver::{SparseOperator, TripletBuilder};

/// Relative tolerance for the mass and trace checks on a [`StepState`].
pub const STATE_MASS_RTOL: f64 = 1e-12;

/// Physical constants, stabilizers and time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    /// Bulk interface thickness.
    pub eps: f64,
    /// Boundary interface thickness.
    pub delta: f64,
    /// Surface diffusion weight.
    pub kappa: f64,
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub tau: f64,
    pub t_final: f64,
}

impl Default for SchemeParams {
    fn default() -> Self {
        SchemeParams {
            eps: 0.02,
            delta: 0.02,
            kappa: 0.02,
            a1: 0.0,
            a2: 0.0,
            b1: 0.0,
            b2: 0.0,
            alpha1: 1.0,
            alpha2: 1.0,
            tau: 1e-4,
            t_final: 1e-2,
        }
    }
}

impl SchemeParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [("eps", self.eps), ("delta", self.delta), ("tau", self.tau), ("t_final", self.t_final)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(format!("scheme.{name}"), format!("must be positive, got {v}")));
            }
        }
        let nonneg = [("kappa", self.kappa), ("a1", self.a1), ("a2", self.a2), ("b1", self.b1), ("b2", self.b2)];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(format!("scheme.{name}"), format!("must be non-negative, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.alpha1) {
            return Err(Error::param("scheme.alpha1", "must lie in [0, 1]"));
        }
        if !(self.alpha2 > 0.0 && self.alpha2 <= 1.0) {
            return Err(Error::param("scheme.alpha2", "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Number of steps to reach `t_final`; fails unless `t_final / tau` is integral.
    pub fn num_steps(&self) -> Result<usize> {
        let ratio = self.t_final / self.tau;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::param(
                "scheme.t_final",
                format!("t_final / tau = {ratio} is not a positive integer"),
            ));
        }
        Ok(n as usize)
    }
}

/// Minimal stabilizers and the unstabilized step bound for given parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCheck {
    pub l1: f64,
    pub l2: f64,
    pub a1_min: f64,
    pub a2_min: f64,
    pub b1_min: f64,
    pub b2_min: f64,
    pub a1_ok: bool,
    pub a2_ok: bool,
    pub b1_ok: bool,
    pub b2_ok: bool,
    pub alpha_ok: bool,
    /// `min{8 eps^3 / L1^2, 8 delta^3 kappa / L2^2}`; infinite when both bounds vanish.
    pub tau_max_unstabilized: f64,
}

impl StabilityCheck {
    pub fn satisfied(&self) -> bool {
        self.a1_ok && self.a2_ok && self.b1_ok && self.b2_ok && self.alpha_ok
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StabilityReport {
    Checked(StabilityCheck),
    /// The potential declares no finite curvature bound.
    NotApplicable { reason: String },
}

impl StabilityReport {
    pub fn satisfied(&self) -> bool {
        matches!(self, StabilityReport::Checked(c) if c.satisfied())
    }
}

impl fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            StabilityReport::NotApplicable { reason } => return write!(f, "not applicable: {reason}"),
            StabilityReport::Checked(c) => c,
        };
        let verdict = |ok: bool| if ok { "pass" } else { "FAIL" };
        writeln!(f, "L1 = {}, L2 = {}", c.l1, c.l2)?;
        writeln!(f, "A1 >= {:.6} : {}", c.a1_min, verdict(c.a1_ok))?;
        writeln!(f, "A2 >= {:.6} : {}", c.a2_min, verdict(c.a2_ok))?;
        writeln!(f, "B1 >= {:.6} : {}", c.b1_min, verdict(c.b1_ok))?;
        writeln!(f, "B2 >= {:.6} : {}", c.b2_min, verdict(c.b2_ok))?;
        writeln!(f, "alpha ranges : {}", verdict(c.alpha_ok))?;
        writeln!(f, "tau bound with A1 = A2 = 0 : {:e}", c.tau_max_unstabilized)?;
        write!(f, "overall : {}", if c.satisfied() { "stable" } else { "conditions not met" })
    }
}

/// Evaluates the sufficient stabilizer conditions for unconditional decay of the modified energy.
pub fn check_stability(params: &SchemeParams, pot: &Potential) -> StabilityReport {
    let (l1, l2) = match (pot.l1(), pot.l2()) {
        (Some(l1), Some(l2)) => (l1, l2),
        _ => {
            return StabilityReport::NotApplicable {
                reason: format!(
                    "potential ({} / {}) has unbounded second derivative",
                    pot.bulk.name(),
                    pot.surface.name()
                ),
            }
        }
    };
    let p = params;
    let a1_min = l1 * l1 / (16.0 * p.eps * p.eps * p.alpha2) - p.alpha1 * p.eps / (2.0 * p.tau);
    let a2_min = l2 * l2 / (16.0 * p.delta * p.delta * p.alpha2) - p.alpha1 * p.delta * p.kappa / (2.0 * p.tau);
    let b1_min = l1 / p.eps;
    let b2_min = l2 / p.delta;
    let bound = |num: f64, l: f64| if l == 0.0 { f64::INFINITY } else { num / (l * l) };
    let tau_max = bound(8.0 * p.eps.powi(3), l1).min(bound(8.0 * p.delta.powi(3) * p.kappa, l2));
    StabilityReport::Checked(StabilityCheck {
        l1,
        l2,
        a1_min,
        a2_min,
        b1_min,
        b2_min,
        a1_ok: p.a1 >= a1_min,
        a2_ok: p.a2 >= a2_min,
        b1_ok: p.b1 >= b1_min,
        b2_ok: p.b2 >= b2_min,
        alpha_ok: (0.0..=1.0).contains(&p.alpha1) && p.alpha2 > 0.0 && p.alpha2 <= 1.0,
        tau_max_unstabilized: tau_max,
    })
}

/// Two time levels of bulk and boundary fields.
#[derive(Debug, Clone, PartialEq)]
pub struct StepState {
    pub phi_prev: BulkField,
    pub phi_curr: BulkField,
    pub psi_prev: BoundaryField,
    pub psi_curr: BoundaryField,
    /// Time level of `phi_curr`.
    pub step: usize,
    /// Bulk mean shared by both levels.
    pub m0: f64,
    /// Loop mean shared by both levels.
    pub m1: f64,
}

impl StepState {
    /// Validates trace compatibility and equal means of both levels.
    pub fn new(phi_prev: BulkField, phi_curr: BulkField, step: usize) -> Result<Self> {
        phi_curr.check_grid(phi_prev.grid())?;
        let psi_prev = trace(&phi_prev);
        let psi_curr = trace(&phi_curr);
        let state = StepState {
            m0: phi_curr.mean(),
            m1: psi_curr.mean(),
            phi_prev,
            phi_curr,
            psi_prev,
            psi_curr,
            step,
        };
        state.check()?;
        Ok(state)
    }

    /// A state whose two levels coincide.
    pub fn steady(phi: BulkField) -> Result<Self> {
        StepState::new(phi.clone(), phi, 1)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.phi_curr.grid()
    }

    pub fn check(&self) -> Result<()> {
        let close = |a: f64, b: f64| (a - b).abs() <= STATE_MASS_RTOL * a.abs().max(b.abs()).max(1.0);
        if trace(&self.phi_prev) != self.psi_prev || trace(&self.phi_curr) != self.psi_curr {
            return Err(Error::Invariant { step: self.step, message: "trace mismatch".into() });
        }
        if !close(self.phi_prev.mean(), self.m0) || !close(self.phi_curr.mean(), self.m0) {
            return Err(Error::Invariant {
                step: self.step,
                message: format!(
                    "bulk means differ: {} vs {}",
                    self.phi_prev.mean(),
                    self.phi_curr.mean()
                ),
            });
        }
        if !close(self.psi_prev.mean(), self.m1) || !close(self.psi_curr.mean(), self.m1) {
            return Err(Error::Invariant {
                step: self.step,
                message: format!(
                    "boundary means differ: {} vs {}",
                    self.psi_prev.mean(),
                    self.psi_curr.mean()
                ),
            });
        }
        Ok(())
    }

    /// `phi^{n} - phi^{n-1}`.
    pub fn phi_increment(&self) -> Vec<f64> {
        self.phi_curr.values().iter().zip(self.phi_prev.values()).map(|(a, b)| a - b).collect()
    }

    /// `psi^{n} - psi^{n-1}`.
    pub fn psi_increment(&self) -> Vec<f64> {
        self.psi_curr.values().iter().zip(self.psi_prev.values()).map(|(a, b)| a - b).collect()
    }
}

/// Result of one time step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub state: StepState,
    pub mu: BulkField,
    pub mu_gamma: BoundaryField,
    pub report: SolveReport,
}

/// Which integrator a system belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    /// Stabilized BDF2.
    Bdf2,
    /// Backward Euler with explicit nonlinearity and `B` stabilizers; start-up only.
    FirstOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PreconditionerKind {
    None,
    Jacobi,
    /// Exact band LU of the operator; GMRES then acts as iterative refinement.
    #[default]
    BandedLu,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub tol: f64,
    pub restart: usize,
    pub max_iterations: Option<usize>,
    pub preconditioner: PreconditionerKind,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { tol: 1e-10, restart: 50, max_iterations: None, preconditioner: PreconditionerKind::BandedLu }
    }
}

/// Matrix coefficients that distinguish the two integrators.
#[derive(Debug, Clone, Copy)]
struct Coefficients {
    /// Leading coefficient of the time difference.
    time: f64,
    /// `A1 tau` (zero for the start-up step).
    a1_tau: f64,
    a2_tau: f64,
}

impl Coefficients {
    fn of(kind: StepKind, p: &SchemeParams) -> Self {
        match kind {
            StepKind::Bdf2 => Coefficients { time: 1.5, a1_tau: p.a1 * p.tau, a2_tau: p.a2 * p.tau },
            StepKind::FirstOrder => Coefficients { time: 1.0, a1_tau: 0.0, a2_tau: 0.0 },
        }
    }
}

/// Index layout of the unknown vector.
#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub nodes: usize,
    pub loop_len: usize,
}

impl Layout {
    pub fn of(grid: &Grid) -> Self {
        Layout { nodes: grid.num_nodes(), loop_len: grid.loop_len() }
    }

    pub fn dim(&self) -> usize {
        2 * self.nodes + self.loop_len
    }

    pub fn phi(&self, node: usize) -> usize {
        node
    }

    pub fn mu(&self, node: usize) -> usize {
        self.nodes + node
    }

    pub fn mu_gamma(&self, k: usize) -> usize {
        2 * self.nodes + k
    }
}

/// Assembles the step operator of the given kind.
pub fn assemble_operator(grid: &Grid, params: &SchemeParams, kind: StepKind) -> Result<SparseOperator> {
    if !grid.supports_normal_derivative() {
        return Err(Error::InvalidGrid(format!(
            "scheme needs at least 4x4 nodes, got {}x{}",
            grid.nx(),
            grid.ny()
        )));
    }
    let c = Coefficients::of(kind, params);
    let lay = Layout::of(grid);
    let n = lay.nodes;
    let p = params;
    let time = c.time / p.tau;
    let mut t = TripletBuilder::with_capacity(lay.dim(), 14 * n + 12 * lay.loop_len);

    for node in 0..n {
        // bulk transport
        let row = node;
        t.push(row, lay.phi(node), time);
        grid.laplacian_row(node, true, |col, a| t.push(row, lay.mu(col), -a));

        let row = n + node;
        match grid.loop_index(node) {
            None => {
                // mu + (eps + A1 tau) L phi - B1 phi
                t.push(row, lay.mu(node), 1.0);
                let coef = p.eps + c.a1_tau;
                grid.laplacian_row(node, false, |col, a| t.push(row, lay.phi(col), coef * a));
                t.push(row, lay.phi(node), -p.b1);
            }
            Some(k) => {
                // surface transport
                t.push(row, lay.phi(node), time);
                grid.laplace_beltrami_row(k, |j, a| t.push(row, lay.mu_gamma(j), -a));
            }
        }
    }

    let boundary = grid.boundary();
    for (k, b) in boundary.iter().enumerate() {
        // mu_G + (delta kappa + A2 tau) D psi - (eps + A1 tau) dn phi - B2 psi
        let row = lay.mu_gamma(k);
        t.push(row, row, 1.0);
        let lb = p.delta * p.kappa + c.a2_tau;
        grid.laplace_beltrami_row(k, |j, a| t.push(row, lay.phi(boundary[j].node), lb * a));
        let nd = p.eps + c.a1_tau;
        grid.normal_derivative_row(k, |col, a| t.push(row, lay.phi(col), -nd * a));
        t.push(row, lay.phi(b.node), -p.b2);
    }
    t.build()
}

/// Right-hand side of the step system for `state`.
///
/// For [`StepKind::FirstOrder`] only `phi_curr` is used.
pub fn assemble_rhs(params: &SchemeParams, pot: &Potential, kind: StepKind, state: &StepState) -> Vec<f64> {
    let grid = state.grid();
    let lay = Layout::of(grid);
    let p = params;
    let c = Coefficients::of(kind, p);
    let now = state.phi_curr.values();
    let before = state.phi_prev.values();
    let n = lay.nodes;

    // time history, extrapolation and B-stabilizer history
    let (hist, extrap, b_hist): (Vec<f64>, Vec<f64>, Vec<f64>) = match kind {
        StepKind::Bdf2 => (
            now.iter().zip(before).map(|(a, b)| 2.0 * a - 0.5 * b).collect(),
            now.iter().zip(before).map(|(a, b)| 2.0 * a - b).collect(),
            now.iter().zip(before).map(|(a, b)| -2.0 * a + b).collect(),
        ),
        StepKind::FirstOrder => (now.to_vec(), now.to_vec(), now.iter().map(|a| -a).collect()),
    };
    let psi_extrap = trace_values(grid, &extrap);
    let psi_b_hist = trace_values(grid, &b_hist);

    let mut lap_now = vec![0.0; n];
    apply_dirichlet_laplacian(grid, now, &mut lap_now);
    let psi_now = trace_values(grid, now);
    let mut lb_now = vec![0.0; lay.loop_len];
    apply_laplace_beltrami(grid, &psi_now, &mut lb_now);
    let mut nd_now = vec![0.0; lay.loop_len];
    apply_normal_derivative(grid, now, &mut nd_now);

    let mut rhs = vec![0.0; lay.dim()];
    for node in 0..n {
        rhs[node] = hist[node] / p.tau;
        rhs[n + node] = match grid.loop_index(node) {
            None => {
                pot.bulk.derivative(extrap[node]) / p.eps + c.a1_tau * lap_now[node] + p.b1 * b_hist[node]
            }
            Some(_) => hist[node] / p.tau,
        };
    }
    for k in 0..lay.loop_len {
        rhs[lay.mu_gamma(k)] = pot.surface.derivative(psi_extrap[k]) / p.delta + c.a2_tau * lb_now[k]
            - c.a1_tau * nd_now[k]
            + p.b2 * psi_b_hist[k];
    }
    rhs
}

enum Precond {
    Identity(Identity),
    Jacobi(Jacobi),
    Lu(BandedLu),
}

impl Precond {
    fn build(kind: PreconditionerKind, op: &SparseOperator) -> Result<Self> {
        Ok(match kind {
            PreconditionerKind::None => Precond::Identity(Identity),
            PreconditionerKind::Jacobi => Precond::Jacobi(Jacobi::new(&op.diagonal())),
            PreconditionerKind::BandedLu => Precond::Lu(BandedLu::factor(op)?),
        })
    }

    fn as_dyn(&self) -> &dyn Preconditioner {
        match self {
            Precond::Identity(p) => p,
            Precond::Jacobi(p) => p,
            Precond::Lu(p) => p,
        }
    }
}

struct System {
    op: SparseOperator,
    precond: Precond,
}

impl System {
    fn new(grid: &Grid, params: &SchemeParams, kind: StepKind, settings: &SolverSettings) -> Result<Self> {
        let op = assemble_operator(grid, params, kind)?;
        let precond = Precond::build(settings.preconditioner, &op)?;
        Ok(System { op, precond })
    }
}

/// Time stepper holding the assembled (time-independent) operators.
pub struct Stepper {
    grid: Arc<Grid>,
    params: SchemeParams,
    potential: Potential,
    settings: SolverSettings,
    bdf2: System,
}

impl Stepper {
    pub fn new(grid: &Arc<Grid>, params: SchemeParams, potential: Potential, settings: SolverSettings) -> Result<Self> {
        params.validate()?;
        let bdf2 = System::new(grid, &params, StepKind::Bdf2, &settings)?;
        Ok(Stepper { grid: Arc::clone(grid), params, potential, settings, bdf2 })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn operator(&self) -> &SparseOperator {
        &self.bdf2.op
    }

    /// First-order start-up step from `phi0` (with `psi0` its trace).
    pub fn bootstrap(&self, phi0: &BulkField, psi0: &BoundaryField) -> Result<StepOutput> {
        phi0.check_grid(&self.grid)?;
        psi0.check_grid(&self.grid)?;
        if trace(phi0) != *psi0 {
            return Err(Error::Invariant { step: 0, message: "initial psi is not the trace of phi".into() });
        }
        let system = System::new(&self.grid, &self.params, StepKind::FirstOrder, &self.settings)?;
        let start = StepState::steady(phi0.clone())?;
        let start = StepState { step: 0, ..start };
        self.solve(&system, StepKind::FirstOrder, &start)
    }

    /// Advances `state` by one BDF2 step.
    pub fn step(&self, state: &StepState) -> Result<StepOutput> {
        state.phi_curr.check_grid(&self.grid)?;
        self.solve(&self.bdf2, StepKind::Bdf2, state)
    }

    fn solve(&self, system: &System, kind: StepKind, state: &StepState) -> Result<StepOutput> {
        let lay = Layout::of(&self.grid);
        let n = lay.nodes;
        let rhs = assemble_rhs(&self.params, &self.potential, kind, state);
        let mut x0 = vec![0.0; lay.dim()];
        let now = state.phi_curr.values();
        let before = state.phi_prev.values();
        for i in 0..n {
            x0[i] = match kind {
                StepKind::Bdf2 => 2.0 * now[i] - before[i],
                StepKind::FirstOrder => now[i],
            };
        }
        let opts = GmresOptions {
            tol: self.settings.tol,
            restart: self.settings.restart,
            max_iterations: self.settings.max_iterations,
        };
        let next_step = state.step + 1;
        let (z, report) = gmres_preconditioned(&system.op, system.precond.as_dyn(), &rhs, &x0, &opts)
            .map_err(|e| match e {
                Error::NotConverged { iterations, residual } => {
                    log::error!("step {next_step}: GMRES stopped at residual {residual:e}");
                    Error::NotConverged { iterations, residual }
                }
                other => other,
            })?;
        if let Some(bad) = z.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSolution {
                step: next_step,
                detail: format!("unknown {bad}, residual history {:?}", report.residual_history),
            });
        }
        let phi = BulkField::from_values(&self.grid, z[..n].to_vec())?;
        let mu = BulkField::from_values(&self.grid, z[n..2 * n].to_vec())?;
        let mu_gamma = BoundaryField::from_values(&self.grid, z[2 * n..].to_vec())?;
        let psi = trace(&phi);
        let state = StepState {
            phi_prev: state.phi_curr.clone(),
            psi_prev: state.psi_curr.clone(),
            phi_curr: phi,
            psi_curr: psi,
            step: next_step,
            m0: state.m0,
            m1: state.m1,
        };
        Ok(StepOutput { state, mu, mu_gamma, report })
    }
}

/// One-off start-up step; assembles its own operator.
pub fn bootstrap_first_step(
    phi0: &BulkField,
    psi0: &BoundaryField,
    params: &SchemeParams,
    pot: &Potential,
) -> Result<StepState> {
    let stepper = Stepper::new(phi0.grid(), *params, *pot, SolverSettings::default())?;
    Ok(stepper.bootstrap(phi0, psi0)?.state)
}

/// One-off BDF2 step; assembles its own operator.
pub fn bdf2_step(state: &StepState, params: &SchemeParams, pot: &Potential) -> Result<StepOutput> {
    let stepper = Stepper::new(state.grid(), *params, *pot, SolverSettings::default())?;
    stepper.step(state)
}
