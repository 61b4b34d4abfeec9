//! Run configuration in TOML with sections `[grid]`, `[scheme]`,
//! `[potential]`, `[initial]`, `[output]`, `[solver]` and the optional
//! `[convergence]`.
//!
//! Unknown keys are rejected with their line number. Defaults: `lx = ly = 1`,
//! stabilizers `0`, `alpha1 = alpha2 = 1`, `stability_check = "warn"`,
//! `output.dir = "output"`, `output.cadence = 1`, solver tolerance `1e-10`,
//! restart `50`, banded-LU preconditioning.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::initial::{InitialConfig, Shape};
use crate::mesh::Grid;
use crate::potential::{flory_huggins_density, Density, Potential};
use crate::scheme::{PreconditionerKind, SchemeParams, SolverSettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub scheme: SchemeConfig,
    pub potential: PotentialConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceConfig>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Node counts per axis.
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "one")]
    pub lx: f64,
    #[serde(default = "one")]
    pub ly: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StabilityMode {
    /// Refuse to run when the stabilizer conditions fail.
    Enforce,
    #[default]
    Warn,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub eps: f64,
    pub delta: f64,
    pub kappa: f64,
    #[serde(default)]
    pub a1: f64,
    #[serde(default)]
    pub a2: f64,
    #[serde(default)]
    pub b1: f64,
    #[serde(default)]
    pub b2: f64,
    #[serde(default = "one")]
    pub alpha1: f64,
    #[serde(default = "one")]
    pub alpha2: f64,
    pub tau: f64,
    pub t_final: f64,
    #[serde(default)]
    pub stability_check: StabilityMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    DoubleWell,
    ModifiedDoubleWell,
    FloryHuggins,
    ContactLine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub bulk: PotentialKind,
    /// Defaults to the bulk kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<PotentialKind>,
    /// Flory-Huggins interaction parameter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Flory-Huggins regularization width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    /// Contact-line strength; defaults to `sqrt(2)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Cosine of the static contact angle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cos_theta: Option<f64>,
}

impl PotentialConfig {
    pub fn single(kind: PotentialKind) -> Self {
        PotentialConfig { bulk: kind, surface: None, theta: None, zeta: None, gamma: None, cos_theta: None }
    }

    fn density(&self, kind: PotentialKind, side: &str) -> Result<Density> {
        Ok(match kind {
            PotentialKind::DoubleWell => Density::DoubleWell,
            PotentialKind::ModifiedDoubleWell => Density::ModifiedDoubleWell,
            PotentialKind::FloryHuggins => {
                let theta = self.theta.ok_or_else(|| Error::param("potential.theta", "required for flory-huggins"))?;
                let zeta = self.zeta.ok_or_else(|| Error::param("potential.zeta", "required for flory-huggins"))?;
                flory_huggins_density(theta, zeta)?
            }
            PotentialKind::ContactLine => {
                if side == "bulk" {
                    return Err(Error::param("potential.bulk", "contact-line is a surface density"));
                }
                let gamma = self.gamma.unwrap_or(std::f64::consts::SQRT_2);
                if !(gamma > 0.0 && gamma.is_finite()) {
                    return Err(Error::param("potential.gamma", "must be positive"));
                }
                let cos_theta =
                    self.cos_theta.ok_or_else(|| Error::param("potential.cos_theta", "required for contact-line"))?;
                if !(-1.0..=1.0).contains(&cos_theta) {
                    return Err(Error::param("potential.cos_theta", "must lie in [-1, 1]"));
                }
                Density::ContactLine { gamma, cos_theta }
            }
        })
    }

    pub fn build(&self) -> Result<Potential> {
        let bulk = self.density(self.bulk, "bulk")?;
        let surface = self.density(self.surface.unwrap_or(self.bulk), "surface")?;
        Ok(Potential::new(bulk, surface))
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("output")
}

fn default_cadence() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// A time-series row every `cadence` steps (plus the final step).
    #[serde(default = "default_cadence")]
    pub cadence: usize,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Also write legacy VTK files next to the CSV snapshots.
    #[serde(default)]
    pub vtk: bool,
    /// Emit the final profile along `y = cutline_y`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutline_y: Option<f64>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_dir(), cadence: 1, snapshot_times: Vec::new(), vtk: false, cutline_y: None }
    }
}

fn default_tol() -> f64 {
    1e-10
}

fn default_restart() -> usize {
    50
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreconditionerName {
    None,
    Jacobi,
    #[default]
    BandedLu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_restart")]
    pub restart: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(default)]
    pub preconditioner: PreconditionerName,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: 1e-10, restart: 50, max_iterations: None, preconditioner: PreconditionerName::BandedLu }
    }
}

/// Step-size ladder for the temporal convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub taus: Vec<f64>,
    pub tau_ref: f64,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

impl RunConfig {
    /// Parses and validates a TOML document.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(0);
            Error::ConfigParse { line, message: e.message().to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable in TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.nx < 4 || g.ny < 4 {
            return Err(Error::param("grid.nx", "need at least 4 nodes per axis"));
        }
        for (name, v) in [("grid.lx", g.lx), ("grid.ly", g.ly)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, "must be positive"));
            }
        }
        self.grid()?;
        self.scheme_params().validate()?;
        self.scheme_params().num_steps()?;
        self.potential.build()?;
        self.initial.validate()?;
        let o = &self.output;
        if o.cadence == 0 {
            return Err(Error::param("output.cadence", "must be at least 1"));
        }
        let t_final = self.scheme.t_final;
        if let Some(t) = o.snapshot_times.iter().find(|t| !(**t >= 0.0 && **t <= t_final * (1.0 + 1e-12))) {
            return Err(Error::param("output.snapshot_times", format!("{t} outside [0, t_final]")));
        }
        if let Some(y) = o.cutline_y {
            if !(0.0..=g.ly).contains(&y) {
                return Err(Error::param("output.cutline_y", format!("{y} outside [0, ly]")));
            }
        }
        let s = &self.solver;
        if !(s.tol > 0.0 && s.tol < 1.0) {
            return Err(Error::param("solver.tol", "must lie in (0, 1)"));
        }
        if s.restart == 0 {
            return Err(Error::param("solver.restart", "must be at least 1"));
        }
        if let Some(c) = &self.convergence {
            if c.taus.len() < 2 {
                return Err(Error::param("convergence.taus", "need at least two step sizes"));
            }
            for &tau in c.taus.iter().chain(std::iter::once(&c.tau_ref)) {
                let p = SchemeParams { tau, ..self.scheme_params() };
                p.validate().and_then(|_| p.num_steps()).map_err(|_| {
                    Error::param("convergence.taus", format!("tau = {tau} does not divide t_final"))
                })?;
            }
            if c.taus.iter().any(|&t| t <= c.tau_ref) {
                return Err(Error::param("convergence.tau_ref", "must be smaller than every tau"));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        Grid::new(self.grid.nx, self.grid.ny, self.grid.lx, self.grid.ly).map(Arc::new)
    }

    pub fn scheme_params(&self) -> SchemeParams {
        let s = &self.scheme;
        SchemeParams {
            eps: s.eps,
            delta: s.delta,
            kappa: s.kappa,
            a1: s.a1,
            a2: s.a2,
            b1: s.b1,
            b2: s.b2,
            alpha1: s.alpha1,
            alpha2: s.alpha2,
            tau: s.tau,
            t_final: s.t_final,
        }
    }

    pub fn potential(&self) -> Result<Potential> {
        self.potential.build()
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            tol: self.solver.tol,
            restart: self.solver.restart,
            max_iterations: self.solver.max_iterations,
            preconditioner: match self.solver.preconditioner {
                PreconditionerName::None => PreconditionerKind::None,
                PreconditionerName::Jacobi => PreconditionerKind::Jacobi,
                PreconditionerName::BandedLu => PreconditionerKind::BandedLu,
            },
        }
    }

    /// Square grid with `n` nodes per side, keeping the domain.
    pub fn with_nodes(mut self, n: usize) -> Self {
        let ratio = self.grid.ly / self.grid.lx;
        self.grid.nx = n;
        self.grid.ny = ((n - 1) as f64 * ratio).round() as usize + 1;
        self
    }

    pub fn with_time(mut self, tau: f64, t_final: f64) -> Self {
        self.scheme.tau = tau;
        self.scheme.t_final = t_final;
        self
    }

    pub fn preset(name: &str) -> Result<Self> {
        preset(name)
    }
}

pub const PRESET_NAMES: &[&str] = &[
    "accuracy",
    "accuracy-small",
    "case1",
    "case2",
    "case3",
    "case4",
    "case5",
    "contact-line-60",
    "contact-line-120",
    "flory-huggins",
];

#[allow(clippy::too_many_arguments)]
fn scheme(eps: f64, delta: f64, kappa: f64, a: (f64, f64), b: (f64, f64), tau: f64, t_final: f64) -> SchemeConfig {
    SchemeConfig {
        eps,
        delta,
        kappa,
        a1: a.0,
        a2: a.1,
        b1: b.0,
        b2: b.1,
        alpha1: 1.0,
        alpha2: 1.0,
        tau,
        t_final,
        stability_check: StabilityMode::Warn,
    }
}

fn unit_grid(n: usize) -> GridConfig {
    GridConfig { nx: n, ny: n, lx: 1.0, ly: 1.0 }
}

fn shape(shape: Shape) -> InitialConfig {
    InitialConfig::Preset { shape }
}

/// Experiment presets at their published resolution.
pub fn preset(name: &str) -> Result<RunConfig> {
    use PotentialKind::*;
    let base = |grid, scheme, potential, initial| RunConfig {
        grid,
        scheme,
        potential,
        initial,
        output: OutputConfig { dir: PathBuf::from(format!("output/{name}")), ..OutputConfig::default() },
        solver: SolverConfig::default(),
        convergence: None,
    };
    let accuracy_scheme = |tau, t_final| scheme(0.02, 0.02, 0.02, (68.0, 150.0), (120.0, 120.0), tau, t_final);
    let cfg = match name {
        "accuracy" => RunConfig {
            convergence: Some(ConvergenceConfig {
                taus: vec![0.08, 0.04, 0.025, 0.0125, 0.01, 0.005],
                tau_ref: 2.5e-4,
            }),
            ..base(
                unit_grid(257),
                accuracy_scheme(0.005, 4.0),
                PotentialConfig::single(ModifiedDoubleWell),
                shape(Shape::BoundaryOne),
            )
        },
        "accuracy-small" => RunConfig {
            convergence: Some(ConvergenceConfig { taus: vec![4e-3, 2e-3, 1e-3, 5e-4], tau_ref: 1.25e-4 }),
            ..base(
                unit_grid(64),
                accuracy_scheme(1e-3, 0.2),
                PotentialConfig::single(ModifiedDoubleWell),
                shape(Shape::BoundaryOne),
            )
        },
        "case1" => RunConfig {
            output: OutputConfig {
                dir: PathBuf::from("output/case1"),
                cutline_y: Some(0.5),
                snapshot_times: vec![0.002],
                ..OutputConfig::default()
            },
            ..base(
                unit_grid(101),
                scheme(1.0, 0.1, 1.0, (1.0, 1.0), (1.0, 10.0), 1e-5, 0.002),
                PotentialConfig::single(DoubleWell),
                shape(Shape::Step),
            )
        },
        "case2" => base(
            unit_grid(101),
            scheme(0.02, 0.02, 1.0, (1.0, 1.0), (50.0, 50.0), 1e-5, 0.001),
            PotentialConfig::single(DoubleWell),
            shape(Shape::Waves),
        ),
        "case3" => base(
            unit_grid(101),
            scheme(0.02, 0.02, 0.02, (5.0, 5.0), (100.0, 100.0), 8e-6, 0.025),
            PotentialConfig::single(DoubleWell),
            shape(Shape::BoundaryOne),
        ),
        "case4" => base(
            unit_grid(101),
            scheme(0.02, 0.02, 1.0, (5.0, 5.0), (100.0, 100.0), 8e-5, 0.2),
            PotentialConfig::single(DoubleWell),
            shape(Shape::MaxSines),
        ),
        "case5" => base(
            unit_grid(101),
            scheme(0.02, 0.02, 0.02, (5.0, 5.0), (100.0, 100.0), 2e-4, 0.5),
            PotentialConfig::single(DoubleWell),
            shape(Shape::Droplet),
        ),
        "contact-line-60" | "contact-line-120" => base(
            unit_grid(101),
            scheme(0.02, 0.02, 0.02, (5.0, 5.0), (100.0, 100.0), 1e-5, 0.01),
            PotentialConfig {
                surface: Some(ContactLine),
                cos_theta: Some(if name == "contact-line-60" { 0.5 } else { -0.5 }),
                ..PotentialConfig::single(DoubleWell)
            },
            shape(Shape::Droplet),
        ),
        "flory-huggins" => base(
            GridConfig { nx: 129, ny: 129, lx: 0.5, ly: 0.5 },
            scheme(0.05, 0.05, 1.0, (10.0, 10.0), (500.0, 500.0), 1e-4, 0.05),
            PotentialConfig { theta: Some(2.5), zeta: Some(0.005), ..PotentialConfig::single(FloryHuggins) },
            InitialConfig::Random { seed: 2024, low: 0.4, high: 0.6 },
        ),
        other => {
            return Err(Error::param(
                "preset",
                format!("unknown preset {other:?}; available: {}", PRESET_NAMES.join(", ")),
            ))
        }
    };
    cfg.validate()?;
    Ok(cfg)
}
