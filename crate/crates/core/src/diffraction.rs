//! Keller diffraction coefficients and predicted wave-trace singularities.
//!
//! A windowed wave trace near a length `t0` behaves like `c k^a`; the
//! singularity then has Sobolev order `(a + 1/2)+`. Predictions are stated
//! per unit window value, i.e. with the window factor at `t0` divided out.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::billiards::{OrbitKind, OrbitRecord};
use crate::config::{KELLER_POLE_TOL, NON_DIFFRACTIVE_TOL};
use crate::fem::BoundaryCondition;
use crate::geometry::TrapezoidSpec;
use crate::{Error, Result};

/// Keller coefficient `S_delta(eta)` of a cone of angle `delta` for the
/// diffraction angle `eta`.
pub fn keller_coefficient(delta: f64, eta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite() && eta.is_finite()) {
        return Err(Error::Domain(format!("cone angle {delta} must be positive and finite")));
    }
    let s1 = (PI * (PI + eta) / delta).sin();
    let s2 = (PI * (PI - eta) / delta).sin();
    for factor in [s1, s2] {
        if factor.abs() < KELLER_POLE_TOL {
            return Err(Error::GeometricDiffraction { delta, eta, factor });
        }
    }
    Ok(-(2.0 * PI * PI / delta).sin() / (2.0 * delta * s1 * s2))
}

/// `S_delta(0) = -cot(pi^2 / delta) / delta`.
pub fn keller_coefficient_forward(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Domain(format!("cone angle {delta} must be positive and finite")));
    }
    let s = (PI * PI / delta).sin();
    if s.abs() < KELLER_POLE_TOL {
        return Err(Error::GeometricDiffraction { delta, eta: 0.0, factor: s });
    }
    Ok(-(PI * PI / delta).cos() / s / delta)
}

fn check_acute(name: &str, a: f64) -> Result<()> {
    if a > 0.0 && a < FRAC_PI_2 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {a} must lie in (0, pi/2)")))
    }
}

/// Two-diffraction amplitude constant of the top-edge orbit.
pub fn c_alpha_beta(alpha: f64, beta: f64) -> Result<f64> {
    check_acute("alpha", alpha)?;
    check_acute("beta", beta)?;
    let half = |a: f64| PI * PI / (2.0 * PI - 2.0 * a);
    let cot = |x: f64| x.cos() / x.sin();
    Ok(cot(half(alpha)) * cot(half(beta)) / ((PI - alpha) * (PI - beta)))
}

/// One-diffraction amplitude constant of the top-edge orbit when the
/// top-left corner is a right angle.
pub fn c_beta(beta: f64) -> Result<f64> {
    check_acute("beta", beta)?;
    let x = PI * PI / (2.0 * PI - 2.0 * beta);
    Ok(-(x.cos() / x.sin()) / (PI - beta))
}

/// Whether a polygon corner of interior angle `theta` diffracts, i.e. is
/// not of the form `pi/N`.
pub fn is_diffractive_vertex(theta: f64) -> bool {
    if !(theta > 0.0 && theta < 2.0 * PI) {
        return true;
    }
    let n = (PI / theta).round();
    n < 1.0 || (theta - PI / n).abs() > NON_DIFFRACTIVE_TOL
}

/// Half-integer `n / 2`, used for exact order bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HalfInt(pub i32);

impl HalfInt {
    pub const HALF: HalfInt = HalfInt(1);

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

impl std::ops::Add for HalfInt {
    type Output = HalfInt;
    fn add(self, o: HalfInt) -> HalfInt {
        HalfInt(self.0 + o.0)
    }
}

impl std::fmt::Display for HalfInt {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Amplitude {
    Known { magnitude: f64 },
    /// Nonzero leading constant that has no closed form; only its scale is known.
    Unspecified { scale: f64 },
    /// Only an upper bound `O(k^bound)` on the trace is known.
    Suppressed { bound: HalfInt },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingularityPrediction {
    pub bc: BoundaryCondition,
    pub t0: f64,
    /// `Some` unless the amplitude is suppressed.
    pub k_exponent: Option<HalfInt>,
    pub order: Option<HalfInt>,
    pub amplitude: Amplitude,
    #[serde(serialize_with = "ser_complex")]
    pub phase: Complex64,
}

fn ser_complex<S: serde::Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

impl SingularityPrediction {
    fn leading(bc: BoundaryCondition, t0: f64, a: HalfInt, amplitude: Amplitude, phase: Complex64) -> Self {
        Self { bc, t0, k_exponent: Some(a), order: Some(a + HalfInt::HALF), amplitude, phase }
    }

    pub fn is_suppressed(&self) -> bool {
        matches!(self.amplitude, Amplitude::Suppressed { .. })
    }

    /// Predicted `|W(k)|` at unit window value, when the amplitude is known.
    pub fn magnitude_at(&self, k: f64) -> Option<f64> {
        match (self.amplitude, self.k_exponent) {
            (Amplitude::Known { magnitude }, Some(a)) => Some(magnitude * k.powf(a.value())),
            _ => None,
        }
    }
}

/// Leading wave-trace singularity of a named orbit of `t` under `bc`.
///
/// The altitude-family amplitude `2 b h / sqrt(4 pi h)` counts both
/// orientations of the bouncing-ball cylinder.
pub fn singularity_prediction(
    t: &TrapezoidSpec,
    orbit: &OrbitRecord,
    bc: BoundaryCondition,
) -> Result<SingularityPrediction> {
    let t0 = orbit.length;
    match orbit.kind {
        OrbitKind::AltitudeFamily => Ok(SingularityPrediction::leading(
            bc,
            t0,
            HalfInt(1),
            Amplitude::Known { magnitude: altitude_amplitude(t.b() * t.h(), t.h()) },
            Complex64::from_polar(1.0, FRAC_PI_4),
        )),
        OrbitKind::TopEdge => {
            let right = t.alpha() == FRAC_PI_2;
            match bc {
                BoundaryCondition::Dirichlet => Ok(SingularityPrediction {
                    bc,
                    t0,
                    k_exponent: None,
                    order: None,
                    amplitude: Amplitude::Suppressed { bound: if right { HalfInt(-3) } else { HalfInt(-4) } },
                    phase: Complex64::new(1.0, 0.0),
                }),
                BoundaryCondition::Neumann if right => Ok(SingularityPrediction::leading(
                    bc,
                    t0,
                    HalfInt(-1),
                    Amplitude::Known { magnitude: (2.0 * PI * t.b()).sqrt() * c_beta(t.beta())? },
                    Complex64::from_polar(1.0, -FRAC_PI_4),
                )),
                BoundaryCondition::Neumann => Ok(SingularityPrediction::leading(
                    bc,
                    t0,
                    HalfInt(-2),
                    Amplitude::Known { magnitude: PI * c_alpha_beta(t.alpha(), t.beta())? },
                    Complex64::new(0.0, -1.0),
                )),
            }
        }
        OrbitKind::Orthic => {
            let sign = match bc {
                BoundaryCondition::Dirichlet => 1.0,
                BoundaryCondition::Neumann => -1.0,
            };
            Ok(SingularityPrediction::leading(
                bc,
                t0,
                HalfInt(0),
                Amplitude::Unspecified { scale: t0 },
                Complex64::new(sign, 0.0),
            ))
        }
        OrbitKind::Generic => Err(Error::UnsupportedOrbit("generic".into())),
    }
}

/// Per-unit-window amplitude of the altitude family with inner rectangle
/// area `inner_area` and height `h`.
pub fn altitude_amplitude(inner_area: f64, h: f64) -> f64 {
    2.0 * inner_area / (4.0 * PI * h).sqrt()
}
