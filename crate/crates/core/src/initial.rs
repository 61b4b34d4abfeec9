//! Initial phase fields.

use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::mesh::{BulkField, Grid};
use crate::output::read_grid_csv;

/// Named initial shapes used by the experiment presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    /// `0` at interior nodes, `1` on the perimeter.
    BoundaryOne,
    /// `1` for `x > 1/2`, `-1` otherwise.
    Step,
    /// `sin(4 pi x) cos(4 pi y)`.
    Waves,
    /// `max{0.1 sin(pi x), 0.1 sin(pi y)}`.
    MaxSines,
    /// `+1` inside the square of side `1/2` centred at `(1/2, 1/4)`, `-1` outside.
    Droplet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialConfig {
    Preset { shape: Shape },
    Expression { expr: String },
    /// Independent uniform samples in `[low, high)`, drawn in node order.
    Random { seed: u64, low: f64, high: f64 },
    /// Grid CSV in snapshot format.
    File { path: PathBuf },
}

impl InitialConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            InitialConfig::Expression { expr } => Expr::parse(expr).map(|_| ()),
            InitialConfig::Random { low, high, .. } => {
                if low.is_finite() && high.is_finite() && low < high {
                    Ok(())
                } else {
                    Err(Error::param("initial.low", format!("need finite low < high, got [{low}, {high})")))
                }
            }
            _ => Ok(()),
        }
    }

    pub fn build(&self, grid: &Arc<Grid>) -> Result<BulkField> {
        match self {
            InitialConfig::Preset { shape } => Ok(shape_field(*shape, grid)),
            InitialConfig::Expression { expr } => {
                let e = Expr::parse(expr)?;
                let field = BulkField::from_fn(grid, |x, y| e.eval(x, y));
                if let Some(bad) = field.values().iter().position(|v| !v.is_finite()) {
                    return Err(Error::param(
                        "initial.expr",
                        format!("non-finite value at node {bad}"),
                    ));
                }
                Ok(field)
            }
            InitialConfig::Random { seed, low, high } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let values = (0..grid.num_nodes()).map(|_| rng.random_range(*low..*high)).collect();
                BulkField::from_values(grid, values)
            }
            InitialConfig::File { path } => {
                let text = std::fs::read_to_string(path)?;
                let values = read_grid_csv(&text, grid.nx(), grid.ny())?;
                BulkField::from_values(grid, values)
            }
        }
    }
}

pub fn shape_field(shape: Shape, grid: &Arc<Grid>) -> BulkField {
    use std::f64::consts::PI;
    let tol = 1e-12 * grid.h();
    match shape {
        Shape::BoundaryOne => {
            let mut f = BulkField::zeros(grid);
            for b in grid.boundary() {
                f.values_mut()[b.node] = 1.0;
            }
            f
        }
        Shape::Step => BulkField::from_fn(grid, |x, _| if x > 0.5 + tol { 1.0 } else { -1.0 }),
        Shape::Waves => BulkField::from_fn(grid, |x, y| (4.0 * PI * x).sin() * (4.0 * PI * y).cos()),
        Shape::MaxSines => BulkField::from_fn(grid, |x, y| (0.1 * (PI * x).sin()).max(0.1 * (PI * y).sin())),
        Shape::Droplet => BulkField::from_fn(grid, |x, y| {
            if (x - 0.5).abs() <= 0.25 + tol && (y - 0.25).abs() <= 0.25 + tol {
                1.0
            } else {
                -1.0
            }
        }),
    }
}
