//! Linear algebra: sparse operators, restarted GMRES, a dense oracle, a band
//! LU used as a preconditioner, and the singular Poisson inverses behind the
//! H^-1 norms.

pub mod banded;
pub mod dense;
pub mod gmres;
pub mod poisson;
pub mod sparse;

pub use banded::BandedLu;
pub use dense::{dense_solve, DenseMatrix};
pub use gmres::{gmres, gmres_preconditioned, GmresOptions, Preconditioner, SolveReport};
pub use poisson::{loop_poisson_inverse, neumann_poisson_inverse, NeumannPoisson};
pub use sparse::{LinearOperator, SparseOperator, TripletBuilder};
