//! P1 finite-element Laplace eigenvalues on trapezoids.
//!
//! The pipeline is [`generate_mesh`] → [`assemble`] → [`solve_eigs`], or
//! [`compute_spectrum`] for all three. [`RichardsonPair`] pairs an `n` and a
//! `2n` solve and removes the leading `h^2` error, either index by index
//! ([`richardson_extrapolate`]) or as a signed spectral measure.

mod assembly;
pub mod eigen;
mod exact;
pub mod mesh;
mod richardson;
pub mod sparse;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use assembly::{assemble, Assembled};
pub use eigen::{generalized_eigs, EigenOptions, EigenRequest, EigenSolution};
pub use exact::{rectangle_double_spectrum, rectangle_exact_spectrum};
pub use mesh::{element_matrices, generate_mesh, Mesh};
pub use richardson::{richardson_extrapolate, RichardsonPair};

use crate::geometry::TrapezoidSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

impl BoundaryCondition {
    /// `(-1)^{s(B)}`: `-1` for Dirichlet, `+1` for Neumann.
    pub fn sign(self) -> f64 {
        match self {
            Self::Dirichlet => -1.0,
            Self::Neumann => 1.0,
        }
    }
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Dirichlet => "dirichlet",
            Self::Neumann => "neumann",
        })
    }
}

impl FromStr for BoundaryCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dirichlet" | "d" => Ok(Self::Dirichlet),
            "neumann" | "n" => Ok(Self::Neumann),
            _ => Err(Error::Precondition(format!("unknown boundary condition {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fem,
    ExactRectangle,
    Extrapolated,
}

/// Ascending Laplace eigenvalues with their accuracy metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumData {
    bc: BoundaryCondition,
    eigenvalues: Vec<f64>,
    lambda_max_trust: f64,
    lambda_complete: f64,
    mesh_size: f64,
    method: Method,
}

impl SpectrumData {
    /// Validates ordering and sign. `lambda_complete` is the bound below which
    /// no eigenvalue is missing; `lambda_max_trust` the largest value meeting
    /// the accuracy target.
    pub fn new(
        bc: BoundaryCondition,
        eigenvalues: Vec<f64>,
        lambda_max_trust: f64,
        lambda_complete: f64,
        mesh_size: f64,
        method: Method,
    ) -> Result<Self> {
        if eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("eigenvalues must be finite".into()));
        }
        if let Some(i) = eigenvalues.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::Precondition(format!("eigenvalues not ascending at index {}", i + 1)));
        }
        let scale = eigenvalues.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let floor = match bc {
            BoundaryCondition::Dirichlet => 0.0,
            BoundaryCondition::Neumann => -1e-8 * scale,
        };
        if let Some(&v) = eigenvalues.first() {
            if v < floor || (bc == BoundaryCondition::Dirichlet && v == 0.0) {
                return Err(Error::Precondition(format!("{bc} spectrum starts at {v}")));
            }
        }
        if lambda_max_trust.is_nan() || lambda_complete.is_nan() || !(mesh_size >= 0.0) {
            return Err(Error::Precondition("invalid spectrum metadata".into()));
        }
        Ok(Self { bc, eigenvalues, lambda_max_trust, lambda_complete, mesh_size, method })
    }

    /// A list trusted and complete up to its last value.
    pub fn from_values(bc: BoundaryCondition, eigenvalues: Vec<f64>, method: Method) -> Result<Self> {
        let last = eigenvalues.last().copied().unwrap_or(0.0);
        Self::new(bc, eigenvalues, last, last, 0.0, method)
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn count(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn lambda_max_trust(&self) -> f64 {
        self.lambda_max_trust
    }

    pub fn lambda_complete(&self) -> f64 {
        self.lambda_complete
    }

    pub fn mesh_size(&self) -> f64 {
        self.mesh_size
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Eigenvalues up to the trust bound.
    pub fn trusted(&self) -> &[f64] {
        let end = self.eigenvalues.partition_point(|&v| v <= self.lambda_max_trust);
        &self.eigenvalues[..end]
    }

    /// Eigenvalues up to `lambda`.
    pub fn below(&self, lambda: f64) -> &[f64] {
        &self.eigenvalues[..self.eigenvalues.partition_point(|&v| v <= lambda)]
    }
}

/// P1 error below 0.5% up to `TRUST_SCALE / h^2` on well-shaped meshes.
const TRUST_SCALE: f64 = 0.12;

/// Eigenvalues of an assembled pencil.
pub fn solve_eigs(a: &Assembled, request: EigenRequest, opts: &EigenOptions) -> Result<SpectrumData> {
    let sol = generalized_eigs(&a.stiffness, &a.mass, Some(&a.ordering), request, opts)?;
    let mut values = sol.values;
    if a.bc == BoundaryCondition::Neumann {
        // the constant mode is exactly zero
        if let Some(v) = values.first_mut() {
            if v.abs() <= 1e-8 * opts_scale(a) {
                *v = 0.0;
            }
        }
    }
    let last = values.last().copied().unwrap_or(0.0);
    let trust = last.min(TRUST_SCALE / (a.mesh_size * a.mesh_size));
    SpectrumData::new(a.bc, values, trust, sol.lambda_complete, a.mesh_size, Method::Fem)
}

fn opts_scale(a: &Assembled) -> f64 {
    a.stiffness.norm_inf() / a.mass.norm_inf()
}

/// Mesh, assemble and solve in one call.
pub fn compute_spectrum(
    t: &TrapezoidSpec,
    n: usize,
    bc: BoundaryCondition,
    request: EigenRequest,
    opts: &EigenOptions,
) -> Result<SpectrumData> {
    let mesh = generate_mesh(t, n)?;
    solve_eigs(&assemble(&mesh, bc), request, opts)
}
