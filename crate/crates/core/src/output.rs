//! Text writers: time-series CSV, grid snapshots, legacy VTK and cutlines.
//!
//! Floats are printed in shortest round-trip scientific form, so outputs are
//! reproducible bit for bit and can be read back exactly.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mesh::BulkField;

pub const TIME_SERIES_HEADER: &str =
    "step,t,E_bulk,E_surf,E_total,E_modified,mass_bulk,mass_bdry,gmres_iters,residual";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSeriesRow {
    pub step: usize,
    pub t: f64,
    pub e_bulk: f64,
    pub e_surf: f64,
    pub e_total: f64,
    pub e_modified: f64,
    pub mass_bulk: f64,
    pub mass_bdry: f64,
    pub gmres_iters: usize,
    pub residual: f64,
}

impl TimeSeriesRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{:e}",
            self.step,
            self.t,
            self.e_bulk,
            self.e_surf,
            self.e_total,
            self.e_modified,
            self.mass_bulk,
            self.mass_bdry,
            self.gmres_iters,
            self.residual
        )
    }

    pub fn from_csv(line: &str) -> Result<Self> {
        let cols: Vec<&str> = line.trim().split(',').collect();
        if cols.len() != 10 {
            return Err(Error::param("time series", format!("expected 10 columns, got {}", cols.len())));
        }
        let f = |i: usize| -> Result<f64> {
            cols[i].parse().map_err(|_| Error::param("time series", format!("bad number {:?}", cols[i])))
        };
        let u = |i: usize| -> Result<usize> {
            cols[i].parse().map_err(|_| Error::param("time series", format!("bad integer {:?}", cols[i])))
        };
        Ok(TimeSeriesRow {
            step: u(0)?,
            t: f(1)?,
            e_bulk: f(2)?,
            e_surf: f(3)?,
            e_total: f(4)?,
            e_modified: f(5)?,
            mass_bulk: f(6)?,
            mass_bdry: f(7)?,
            gmres_iters: u(8)?,
            residual: f(9)?,
        })
    }
}

/// Parses a whole time-series file including its header.
pub fn read_time_series(text: &str) -> Result<Vec<TimeSeriesRow>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(TIME_SERIES_HEADER) {
        return Err(Error::param("time series", "missing header"));
    }
    lines.filter(|l| !l.trim().is_empty()).map(TimeSeriesRow::from_csv).collect()
}

/// One line per grid row `j = 0, 1, ...`, values along `x` separated by commas.
pub fn grid_csv(field: &BulkField) -> String {
    let g = field.grid();
    let mut out = String::with_capacity(g.num_nodes() * 24);
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{:e}", field.get(i, j));
        }
        out.push('\n');
    }
    out
}

/// Inverse of [`grid_csv`]; returns node-ordered values.
pub fn read_grid_csv(text: &str, nx: usize, ny: usize) -> Result<Vec<f64>> {
    let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if rows.len() != ny {
        return Err(Error::param("initial.path", format!("expected {ny} rows, found {}", rows.len())));
    }
    let mut values = Vec::with_capacity(nx * ny);
    for (j, row) in rows.iter().enumerate() {
        let before = values.len();
        for cell in row.split(',') {
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::param("initial.path", format!("row {}: bad number {:?}", j + 1, cell.trim()))
            })?;
            values.push(v);
        }
        if values.len() - before != nx {
            return Err(Error::param(
                "initial.path",
                format!("row {}: expected {nx} values, found {}", j + 1, values.len() - before),
            ));
        }
    }
    Ok(values)
}

/// Legacy VTK `STRUCTURED_POINTS` file in ASCII.
pub fn vtk_structured_points(field: &BulkField, name: &str) -> String {
    let g = field.grid();
    let mut out = String::with_capacity(g.num_nodes() * 24 + 256);
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "{name}");
    let _ = writeln!(out, "ASCII");
    let _ = writeln!(out, "DATASET STRUCTURED_POINTS");
    let _ = writeln!(out, "DIMENSIONS {} {} 1", g.nx(), g.ny());
    let _ = writeln!(out, "ORIGIN 0 0 0");
    let _ = writeln!(out, "SPACING {:e} {:e} 1", g.h(), g.h());
    let _ = writeln!(out, "POINT_DATA {}", g.num_nodes());
    let _ = writeln!(out, "SCALARS {name} double 1");
    let _ = writeln!(out, "LOOKUP_TABLE default");
    // VTK orders points x fastest, which is the node order
    for v in field.values() {
        let _ = writeln!(out, "{v:e}");
    }
    out
}

/// Profile `x, phi(x, y)` along a horizontal line, interpolating linearly between rows.
pub fn cutline_csv(field: &BulkField, y: f64) -> Result<String> {
    let g = field.grid();
    if !(0.0..=g.ly()).contains(&y) {
        return Err(Error::param("cutline", format!("y = {y} outside [0, {}]", g.ly())));
    }
    let s = y / g.h();
    let j0 = (s.floor() as usize).min(g.ny() - 2);
    let frac = s - j0 as f64;
    let mut out = String::from("x,phi\n");
    for i in 0..g.nx() {
        let v = if frac.abs() < 1e-9 {
            field.get(i, j0)
        } else if (1.0 - frac).abs() < 1e-9 {
            field.get(i, j0 + 1)
        } else {
            (1.0 - frac) * field.get(i, j0) + frac * field.get(i, j0 + 1)
        };
        let _ = writeln!(out, "{:e},{v:e}", i as f64 * g.h());
    }
    Ok(out)
}
