//! `chdbc`: run simulations, convergence studies, sweeps and stabilizer checks.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver failure,
//! 4 invariant violation, 1 anything else (I/O).

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use chdbc::config::{ConvergenceConfig, RunConfig, PRESET_NAMES};
use chdbc::run::{convergence_to_disk, run, sweep};
use chdbc::scheme::check_stability;
use chdbc::Error;

#[derive(Parser)]
#[command(name = "chdbc", version, about = "Cahn-Hilliard solver with dynamic boundary conditions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its time series and snapshots.
    Run {
        #[command(flatten)]
        source: Source,
        /// Write the final profile along a horizontal line, e.g. `y=0.5`.
        #[arg(long, value_name = "y=VALUE")]
        cutline: Option<String>,
        /// Also write legacy VTK snapshots.
        #[arg(long)]
        vtk: bool,
    },
    /// Run the step-size ladder against a reference step and fit the order.
    Convergence {
        #[command(flatten)]
        source: Source,
        /// Comma-separated step sizes replacing the configured ladder.
        #[arg(long, value_delimiter = ',')]
        taus: Option<Vec<f64>>,
        #[arg(long)]
        tau_ref: Option<f64>,
    },
    /// Repeat a run for each value of one parameter.
    Sweep {
        #[command(flatten)]
        source: Source,
        /// Parameter path such as `scheme.b1`.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Print the stabilizer conditions without running.
    CheckStability {
        #[command(flatten)]
        source: Source,
    },
    /// Print a resolved configuration as TOML.
    PrintConfig {
        #[command(flatten)]
        source: Source,
    },
}

#[derive(Args)]
struct Source {
    /// Configuration file.
    #[arg(long, short, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment preset.
    #[arg(long, short)]
    preset: Option<String>,
    /// Output directory override.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Square grid with this many nodes per side (domain kept).
    #[arg(long)]
    nodes: Option<usize>,
    /// Time step override.
    #[arg(long)]
    tau: Option<f64>,
    /// Final time override.
    #[arg(long)]
    t_final: Option<f64>,
}

impl Source {
    fn load(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), None) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                RunConfig::parse(&text)?
            }
            (None, Some(name)) => RunConfig::preset(name)?,
            _ => bail!(Error::param(
                "source",
                format!("pass --config FILE or --preset NAME ({})", PRESET_NAMES.join(", "))
            )),
        };
        if let Some(n) = self.nodes {
            cfg = cfg.with_nodes(n);
        }
        if self.tau.is_some() || self.t_final.is_some() {
            let tau = self.tau.unwrap_or(cfg.scheme.tau);
            let t_final = self.t_final.unwrap_or(cfg.scheme.t_final);
            cfg = cfg.with_time(tau, t_final);
            cfg.output.snapshot_times.retain(|&t| t <= t_final);
        }
        if let Some(dir) = &self.out {
            cfg.output.dir = dir.clone();
        }
        Ok(cfg)
    }
}

fn parse_cutline(spec: &str) -> anyhow::Result<f64> {
    let value = spec.strip_prefix("y=").unwrap_or(spec);
    value
        .trim()
        .parse()
        .map_err(|_| Error::param("cutline", format!("expected y=VALUE, got {spec:?}")).into())
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { source, cutline, vtk } => {
            let mut cfg = source.load()?;
            if let Some(spec) = cutline {
                cfg.output.cutline_y = Some(parse_cutline(&spec)?);
            }
            cfg.output.vtk |= vtk;
            cfg.validate()?;
            let outcome = run(&cfg)?;
            let last = outcome.history.last().expect("history is never empty");
            let (db, ds) = outcome.max_mass_drift();
            println!("steps: {}", last.step);
            println!("final E_total: {:e}", last.e_total);
            println!("final E_modified: {:e}", last.e_modified);
            println!("max mass drift: bulk {db:e}, boundary {ds:e}");
            println!("output: {}", cfg.output.dir.display());
        }
        Command::Convergence { source, taus, tau_ref } => {
            let mut cfg = source.load()?;
            if taus.is_some() || tau_ref.is_some() {
                let plan = cfg.convergence.get_or_insert(ConvergenceConfig { taus: Vec::new(), tau_ref: 0.0 });
                if let Some(t) = taus {
                    plan.taus = t;
                }
                if let Some(t) = tau_ref {
                    plan.tau_ref = t;
                }
            }
            cfg.validate()?;
            let result = convergence_to_disk(&cfg)?;
            println!("tau,error");
            for r in &result.records {
                println!("{:e},{:e}", r.tau, r.error);
            }
            println!("slope: {:.4}", result.slope);
            println!("output: {}", cfg.output.dir.display());
        }
        Command::Sweep { source, param, values } => {
            let cfg = source.load()?;
            let entries = sweep(&cfg, &param, &values)?;
            println!("value,E_total,E_modified");
            for e in &entries {
                println!("{:e},{:e},{:e}", e.value, e.final_energy, e.final_modified_energy);
            }
            println!("output: {}", cfg.output.dir.display());
        }
        Command::CheckStability { source } => {
            let cfg = source.load()?;
            let report = check_stability(&cfg.scheme_params(), &cfg.potential()?);
            println!("{report}");
        }
        Command::PrintConfig { source } => {
            let cfg = source.load()?;
            print!("{}", cfg.to_toml());
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|cause| cause.downcast_ref::<Error>())
        .map(|e| e.exit_code() as u8)
        .unwrap_or(1)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
