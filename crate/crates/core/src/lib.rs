//! Spectral invariants of planar trapezoids.
//!
//! The crate covers the whole forward/inverse loop for the Laplacian on a
//! trapezoid:
//!
//! * [`geometry`]: the canonical `(b, h, alpha, beta)` parametrization and the
//!   closed-form invariants (area, perimeter, angle invariant `q`).
//! * [`diffraction`]: Keller diffraction coefficients and the predicted
//!   wave-trace singularity of each named periodic orbit.
//! * [`billiards`]: billiard flow, the named orbits and a shooting search for
//!   periodic orbits.
//! * [`fem`]: P1 finite-element Dirichlet/Neumann eigenvalues with a
//!   shift-invert Lanczos solver, plus exact rectangle spectra.
//! * [`traces`]: heat trace fitting and the windowed wave-trace transform.
//! * [`inverse`]: recovery of the trapezoid from its Neumann invariants.
//!
//! The command line front end lives in `src/bin` and uses [`cli`].

pub mod billiards;
pub mod cli;
pub mod config;
pub mod diffraction;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod inverse;
pub mod io;
pub mod traces;

pub use error::{Error, Result};
pub use fem::{BoundaryCondition, SpectrumData};
pub use geometry::{InvariantSet, TrapezoidSpec};
