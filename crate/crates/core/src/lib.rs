//! Finite-difference solver for the Cahn-Hilliard equation with dynamic
//! (Liu-Wu type) boundary conditions.
//!
//! The bulk phase field `phi` and its trace `psi` on the boundary evolve by
//! two coupled Cahn-Hilliard systems that conserve bulk and boundary mass
//! separately. Time stepping uses a linear, stabilized BDF2 scheme whose
//! nonlinear terms are extrapolated, so each step is one constant-coefficient
//! linear solve.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod expr;
pub mod initial;
pub mod mesh;
pub mod output;
pub mod potential;
pub mod run;
pub mod scheme;
pub mod solver;

pub use error::{Error, Result};
pub use mesh::{BoundaryField, BulkField, Grid};
pub use potential::{Density, Potential};
pub use scheme::{SchemeParams, StepState, Stepper};
