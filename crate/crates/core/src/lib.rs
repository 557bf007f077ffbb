//! Benchmark problems with defective eigenvalues of prescribed ascent for
//! non-selfadjoint elliptic operators, their finite element discretization,
//! and convergence studies of the discrete eigenvalue clusters.

pub mod analytic1d;
pub mod bench;
pub mod cases;
pub mod cli;
pub mod cplx;
pub mod dense;
pub mod eigensolve;
pub mod error;
pub mod fem;
pub mod meshing;
pub mod paramfind;
pub mod quadrature;
pub mod sparse;

pub use cplx::C64;
pub use error::{Error, Result};
