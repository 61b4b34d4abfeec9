//! Experiment drivers: single runs, temporal convergence studies and parameter sweeps.
//!
//! Every step is checked for bulk and boundary mass conservation. When the
//! stabilizer conditions hold, the modified energy must not increase either.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{RunConfig, StabilityMode};
use crate::diagnostics::{convergence_study, masses, ConvergenceResult, EnergyMonitor};
use crate::error::{Error, Result};
use crate::mesh::{trace, BulkField};
use crate::output::{cutline_csv, grid_csv, vtk_structured_points, TimeSeriesRow, TIME_SERIES_HEADER};
use crate::scheme::{check_stability, StabilityReport, StepState, Stepper};

/// Allowed mass drift relative to `max(1, |m0|)`.
pub const MASS_RTOL: f64 = 1e-10;
/// Allowed modified-energy increase relative to its magnitude.
pub const ENERGY_RTOL: f64 = 1e-12;

/// Everything a run produced, in memory.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// One row per step, starting with the initial state at step 0.
    pub history: Vec<TimeSeriesRow>,
    pub final_state: StepState,
    pub stability: StabilityReport,
    /// Whether the modified-energy law was asserted during the run.
    pub energy_checked: bool,
    /// Fields at the requested snapshot times as `(step, phi)`.
    pub snapshots: Vec<(usize, BulkField)>,
}

impl RunOutcome {
    pub fn max_mass_drift(&self) -> (f64, f64) {
        let first = &self.history[0];
        self.history.iter().fold((0.0f64, 0.0f64), |(b, s), r| {
            (b.max((r.mass_bulk - first.mass_bulk).abs()), s.max((r.mass_bdry - first.mass_bdry).abs()))
        })
    }
}

/// Resolves the stability policy of `cfg` into a report, failing under `enforce`.
pub fn stability_gate(cfg: &RunConfig) -> Result<StabilityReport> {
    let report = check_stability(&cfg.scheme_params(), &cfg.potential()?);
    match cfg.scheme.stability_check {
        StabilityMode::Skip => {}
        StabilityMode::Warn => {
            if !report.satisfied() {
                log::warn!("stabilizer conditions not met; energy decay is not guaranteed\n{report}");
            }
        }
        StabilityMode::Enforce => {
            if !report.satisfied() {
                return Err(Error::StabilityViolated(report.to_string()));
            }
        }
    }
    Ok(report)
}

fn snapshot_steps(cfg: &RunConfig) -> Vec<usize> {
    let tau = cfg.scheme.tau;
    let mut steps: Vec<usize> = cfg.output.snapshot_times.iter().map(|t| (t / tau).round() as usize).collect();
    steps.sort_unstable();
    steps.dedup();
    steps
}

/// Runs the configured simulation without touching the file system.
pub fn simulate(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let stability = stability_gate(cfg)?;
    let grid = cfg.grid()?;
    let params = cfg.scheme_params();
    let pot = cfg.potential()?;
    let steps = params.num_steps()?;
    let stepper = Stepper::new(&grid, params, pot, cfg.solver_settings())?;
    let monitor = EnergyMonitor::new(&grid, params, pot)?;
    let energy_checked = stability.satisfied() && cfg.scheme.stability_check != StabilityMode::Skip;
    let snap_steps = snapshot_steps(cfg);
    let mut snapshots = Vec::new();

    let phi0 = cfg.initial.build(&grid)?;
    let psi0 = trace(&phi0);
    let start = StepState { step: 0, ..StepState::steady(phi0.clone())? };
    let e0 = monitor.evaluate(&start)?;
    let (mb0, ms0) = masses(&phi0, &psi0);
    let mut history = vec![TimeSeriesRow {
        step: 0,
        t: 0.0,
        e_bulk: e0.e_bulk,
        e_surf: e0.e_surf,
        e_total: e0.e_total,
        e_modified: e0.e_modified.unwrap_or(e0.e_total),
        mass_bulk: mb0,
        mass_bdry: ms0,
        gmres_iters: 0,
        residual: 0.0,
    }];
    if snap_steps.first() == Some(&0) {
        snapshots.push((0, phi0.clone()));
    }

    let mut state = start;
    let report_every = (steps / 10).max(1);
    for n in 1..=steps {
        let out = if n == 1 { stepper.bootstrap(&phi0, &psi0)? } else { stepper.step(&state)? };
        state = out.state;
        let e = monitor.evaluate(&state)?;
        let (mb, ms) = masses(&state.phi_curr, &state.psi_curr);
        if (mb - mb0).abs() > MASS_RTOL * mb0.abs().max(1.0) || (ms - ms0).abs() > MASS_RTOL * ms0.abs().max(1.0) {
            return Err(Error::Invariant {
                step: n,
                message: format!("mass drift: bulk {:e}, boundary {:e}", mb - mb0, ms - ms0),
            });
        }
        let e_mod = e.e_modified.unwrap_or(e.e_total);
        let prev = history.last().map(|r| r.e_modified).unwrap_or(e_mod);
        // the start-up step is first order and not covered by the energy law
        if energy_checked && n >= 2 && e_mod > prev + ENERGY_RTOL * prev.abs() {
            return Err(Error::Invariant {
                step: n,
                message: format!("modified energy increased from {prev:e} to {e_mod:e}"),
            });
        }
        history.push(TimeSeriesRow {
            step: n,
            t: n as f64 * params.tau,
            e_bulk: e.e_bulk,
            e_surf: e.e_surf,
            e_total: e.e_total,
            e_modified: e_mod,
            mass_bulk: mb,
            mass_bdry: ms,
            gmres_iters: out.report.iterations,
            residual: out.report.residual,
        });
        if snap_steps.binary_search(&n).is_ok() {
            snapshots.push((n, state.phi_curr.clone()));
        }
        if n % report_every == 0 {
            log::info!("step {n}/{steps}: E = {:.8e}, gmres {}", e.e_total, out.report.iterations);
        }
    }
    Ok(RunOutcome { history, final_state: state, stability, energy_checked, snapshots })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents)?;
    Ok(())
}

/// Time-series CSV with rows every `cadence` steps and at the final step.
pub fn time_series_csv(history: &[TimeSeriesRow], cadence: usize) -> String {
    let last = history.len().saturating_sub(1);
    let mut out = String::from(TIME_SERIES_HEADER);
    out.push('\n');
    for (k, row) in history.iter().enumerate() {
        if k % cadence.max(1) == 0 || k == last {
            out.push_str(&row.to_csv());
            out.push('\n');
        }
    }
    out
}

/// Runs the simulation and writes its outputs under `output.dir`.
///
/// Files: `config.toml`, `timeseries.csv`, `snapshot_<step>.csv` (and `.vtk`),
/// `final.csv`, and `cutline_y<y>.csv` when requested.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    let outcome = simulate(cfg)?;
    write_outputs(cfg, &outcome)?;
    Ok(outcome)
}

pub fn write_outputs(cfg: &RunConfig, outcome: &RunOutcome) -> Result<()> {
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir)?;
    write(&dir.join("config.toml"), &cfg.to_toml())?;
    write(&dir.join("timeseries.csv"), &time_series_csv(&outcome.history, cfg.output.cadence))?;
    for (step, phi) in &outcome.snapshots {
        write(&dir.join(format!("snapshot_{step:06}.csv")), &grid_csv(phi))?;
        if cfg.output.vtk {
            write(&dir.join(format!("snapshot_{step:06}.vtk")), &vtk_structured_points(phi, "phi"))?;
        }
    }
    let last = &outcome.final_state.phi_curr;
    write(&dir.join("final.csv"), &grid_csv(last))?;
    if cfg.output.vtk {
        write(&dir.join("final.vtk"), &vtk_structured_points(last, "phi"))?;
    }
    if let Some(y) = cfg.output.cutline_y {
        write(&dir.join(format!("cutline_y{y}.csv")), &cutline_csv(last, y)?)?;
    }
    Ok(())
}

/// Temporal convergence study over the `[convergence]` ladder of `cfg`.
pub fn convergence(cfg: &RunConfig) -> Result<ConvergenceResult> {
    let plan = cfg
        .convergence
        .clone()
        .ok_or_else(|| Error::param("convergence", "configuration has no [convergence] section"))?;
    let t_final = cfg.scheme.t_final;
    convergence_study(&plan.taus, plan.tau_ref, |tau| {
        let mut member = cfg.clone().with_time(tau, t_final);
        member.output.snapshot_times.clear();
        log::info!("convergence member tau = {tau:e}");
        Ok(simulate(&member)?.final_state.phi_curr)
    })
}

pub fn convergence_csv(result: &ConvergenceResult) -> String {
    let mut out = String::from("tau,error,phi_l2,psi_l2,phi_hminus1,phi_h1\n");
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for r in &result.records {
        out.push_str(&format!(
            "{:e},{:e},{:e},{:e},{},{}\n",
            r.tau,
            r.error,
            r.phi_l2,
            r.psi_l2,
            opt(r.phi_hminus1),
            opt(r.phi_h1)
        ));
    }
    out
}

/// Runs the study and writes `convergence.csv` and `slope.txt` under `output.dir`.
pub fn convergence_to_disk(cfg: &RunConfig) -> Result<ConvergenceResult> {
    let result = convergence(cfg)?;
    fs::create_dir_all(&cfg.output.dir)?;
    write(&cfg.output.dir.join("convergence.csv"), &convergence_csv(&result))?;
    write(&cfg.output.dir.join("slope.txt"), &format!("{}\n", result.slope))?;
    Ok(result)
}

/// Parameters a sweep may vary.
pub const SWEEP_PARAMS: &[&str] = &[
    "scheme.eps",
    "scheme.delta",
    "scheme.kappa",
    "scheme.a1",
    "scheme.a2",
    "scheme.b1",
    "scheme.b2",
    "scheme.alpha1",
    "scheme.alpha2",
    "scheme.tau",
    "potential.theta",
    "potential.zeta",
    "potential.gamma",
    "potential.cos_theta",
];

/// Returns a copy of `cfg` with `param` set to `value`.
pub fn with_param(cfg: &RunConfig, param: &str, value: f64) -> Result<RunConfig> {
    let mut c = cfg.clone();
    let key = if param.contains('.') { param.to_string() } else { format!("scheme.{param}") };
    match key.as_str() {
        "scheme.eps" => c.scheme.eps = value,
        "scheme.delta" => c.scheme.delta = value,
        "scheme.kappa" => c.scheme.kappa = value,
        "scheme.a1" => c.scheme.a1 = value,
        "scheme.a2" => c.scheme.a2 = value,
        "scheme.b1" => c.scheme.b1 = value,
        "scheme.b2" => c.scheme.b2 = value,
        "scheme.alpha1" => c.scheme.alpha1 = value,
        "scheme.alpha2" => c.scheme.alpha2 = value,
        "scheme.tau" => c.scheme.tau = value,
        "potential.theta" => c.potential.theta = Some(value),
        "potential.zeta" => c.potential.zeta = Some(value),
        "potential.gamma" => c.potential.gamma = Some(value),
        "potential.cos_theta" => c.potential.cos_theta = Some(value),
        _ => {
            return Err(Error::param(
                "sweep.param",
                format!("cannot sweep {param:?}; choose one of {}", SWEEP_PARAMS.join(", ")),
            ))
        }
    }
    c.output.dir = cfg.output.dir.join(format!("{key}={value}"));
    c.validate()?;
    Ok(c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub value: f64,
    pub dir: PathBuf,
    pub final_energy: f64,
    pub final_modified_energy: f64,
    pub max_mass_drift: (f64, f64),
    pub max_gmres_iters: usize,
}

/// One run per value; each writes into its own subdirectory.
pub fn sweep(cfg: &RunConfig, param: &str, values: &[f64]) -> Result<Vec<SweepEntry>> {
    if values.is_empty() {
        return Err(Error::param("sweep.values", "need at least one value"));
    }
    let members = values.iter().map(|&v| with_param(cfg, param, v)).collect::<Result<Vec<_>>>()?;
    let mut entries = Vec::with_capacity(values.len());
    for (member, &value) in members.iter().zip(values) {
        let outcome = run(member)?;
        let last = outcome.history.last().expect("history has the initial row");
        entries.push(SweepEntry {
            value,
            dir: member.output.dir.clone(),
            final_energy: last.e_total,
            final_modified_energy: last.e_modified,
            max_mass_drift: outcome.max_mass_drift(),
            max_gmres_iters: outcome.history.iter().map(|r| r.gmres_iters).max().unwrap_or(0),
        });
    }
    fs::create_dir_all(&cfg.output.dir)?;
    let mut csv = String::from("value,E_total,E_modified,mass_drift_bulk,mass_drift_bdry,max_gmres_iters\n");
    for e in &entries {
        csv.push_str(&format!(
            "{:e},{:e},{:e},{:e},{:e},{}\n",
            e.value, e.final_energy, e.final_modified_energy, e.max_mass_drift.0, e.max_mass_drift.1, e.max_gmres_iters
        ));
    }
    write(&cfg.output.dir.join("sweep.csv"), &csv)?;
    Ok(entries)
}
