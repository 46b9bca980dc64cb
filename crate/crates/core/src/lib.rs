//! Numerical workbench for the magnetic operator algebra of the Landau
//! Hamiltonian.
//!
//! The crate is organised bottom-up:
//!
//! * [`laguerre_basis`]: Laguerre polynomials and functions, polar quadrature,
//!   ladder operators on coefficient arrays.
//! * [`twisted_convolution`]: position-space oracle for the twisted product
//!   and the special kernels of the Landau problem.
//! * [`magnetic_algebra`]: the algebra of transition operators with product,
//!   adjoint, trace and kernel conversion.
//! * [`nc_calculus`]: derivations, Sobolev norms, integration by parts.
//! * [`dirac_triple`]: the magnetic Dirac operator in exact spectral blocks,
//!   its phase and the graded quasi-differential.
//! * [`dixmier_engine`]: singular value streams, Dixmier-trace estimation and
//!   the trace identities built on it.
//! * [`cli_workbench`]: configuration, verification suites and report output
//!   used by the `magws` binary.

pub mod cli_workbench;
pub mod dirac_triple;
pub mod dixmier_engine;
pub mod error;
pub mod laguerre_basis;
pub mod magnetic_algebra;
pub mod nc_calculus;
pub mod twisted_convolution;

pub use error::{MagError, Result};
pub use laguerre_basis::{KernelCoeffs, LagIndex, MagneticParams, Point, C64};
pub use magnetic_algebra::AlgebraElement;
