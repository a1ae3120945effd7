//! Dirac operators with Kirchhoff-type vertex conditions on periodic metric
//! graphs: staggered finite-difference discretization, Floquet-Bloch bands,
//! spectral-gap checks, nonlinear bound states and concentration diagnostics.

pub mod concentration;
pub mod eigen;
pub mod error;
pub mod fem;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod nlde;
pub mod spectral;

pub use error::{Error, Result, SolveError};
pub use linalg::C64;
