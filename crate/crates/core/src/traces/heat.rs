use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::SpectralMeasure;
use crate::fem::BoundaryCondition;
use crate::geometry::q_from_corner_sum;
use crate::{Error, Result};

/// Relative truncation tolerated by [`heat_trace`].
pub const DEFAULT_HEAT_TAIL: f64 = 1e-6;
/// Largest condition number accepted by [`fit_heat_invariants`].
pub const DEFAULT_HEAT_CONDITION: f64 = 1e10;

/// Partial sums `sum_{lambda <= lambda_max_trust} w e^{-lambda t}`.
///
/// A `t` is rejected when the Weyl estimate of the truncated tail,
/// `(A/4 pi) e^{-Lambda t} / t` with `A` read off the counting function at
/// `Lambda`, exceeds `tail_tol` times the value.
pub fn heat_trace<S: SpectralMeasure + ?Sized>(s: &S, t_grid: &[f64], tail_tol: f64) -> Result<Vec<f64>> {
    if let Some(t) = t_grid.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(Error::Precondition(format!("heat trace needs t > 0, got {t}")));
    }
    let trust = s.lambda_max_trust();
    let atoms: Vec<(f64, f64)> = s.atoms().filter(|(l, _)| *l <= trust).collect();
    let count: f64 = atoms.iter().map(|(_, w)| w).sum();
    let area_est = if trust > 0.0 { 4.0 * PI * count / trust } else { 0.0 };
    let mut values = Vec::with_capacity(t_grid.len());
    let mut rejected = Vec::new();
    for &t in t_grid {
        let v: f64 = atoms.iter().map(|(l, w)| w * (-l * t).exp()).sum();
        let tail = area_est / (4.0 * PI) * (-trust * t).exp() / t;
        if tail > tail_tol * v.abs() {
            rejected.push(t);
        }
        values.push(v);
    }
    if rejected.is_empty() {
        Ok(values)
    } else {
        Err(Error::Tail { rejected })
    }
}

/// Smallest `t` accepted by [`heat_trace`] for a trace of size about
/// `A/(4 pi t)`: `e^{-Lambda t} <= tail_tol`.
pub fn min_heat_time(lambda_max_trust: f64, tail_tol: f64) -> f64 {
    -tail_tol.ln() / lambda_max_trust
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveredInvariants {
    pub area: f64,
    pub perimeter: f64,
    pub corner_sum: f64,
}

/// Least-squares fit of `c_m1/t + c_mh/sqrt(t) + c_0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatFit {
    pub bc: BoundaryCondition,
    pub c_m1: f64,
    pub c_mh: f64,
    pub c_0: f64,
    /// Largest relative deviation of the fit over the grid.
    pub residual: f64,
    pub condition: f64,
    pub recovered: RecoveredInvariants,
}

impl HeatFit {
    /// Angle invariant `q` implied by the corner sum.
    pub fn angle_invariant(&self) -> f64 {
        q_from_corner_sum(self.recovered.corner_sum)
    }
}

pub fn fit_heat_invariants(
    values: &[f64],
    t_grid: &[f64],
    bc: BoundaryCondition,
    max_condition: f64,
) -> Result<HeatFit> {
    if values.len() != t_grid.len() {
        return Err(Error::Precondition(format!("{} values for {} times", values.len(), t_grid.len())));
    }
    if t_grid.len() < 8 {
        return Err(Error::Precondition(format!("heat fit needs at least 8 times, got {}", t_grid.len())));
    }
    let (lo, hi) = t_grid.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &t| (a.min(t), b.max(t)));
    if !(lo > 0.0) || hi < 10.0 * lo * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!("heat fit times must span a decade, got [{lo}, {hi}]")));
    }
    let n = t_grid.len();
    let x = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0 / t_grid[i],
        1 => 1.0 / t_grid[i].sqrt(),
        _ => 1.0,
    });
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= max_condition) {
        return Err(Error::IllConditioned(condition));
    }
    let y = DVector::from_column_slice(values);
    let c = svd.solve(&y, 0.0).map_err(|e| Error::DegenerateFit(e.to_string()))?;
    let fitted = &x * &c;
    let residual = fitted
        .iter()
        .zip(values)
        .map(|(f, v)| (f - v).abs() / v.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let recovered = RecoveredInvariants {
        area: 4.0 * PI * c[0],
        perimeter: bc.sign() * 8.0 * PI.sqrt() * c[1],
        corner_sum: c[2],
    };
    if !(recovered.area > 0.0) {
        return Err(Error::DegenerateFit(format!("recovered area {} is not positive", recovered.area)));
    }
    Ok(HeatFit { bc, c_m1: c[0], c_mh: c[1], c_0: c[2], residual, condition, recovered })
}

/// Geometric grid of `n` points on `[lo, hi]`.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (r * i as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{rectangle_exact_spectrum, Method, SpectrumData};
    use approx::assert_relative_eq;

    #[test]
    fn empty_and_invalid() {
        let s = SpectrumData::from_values(BoundaryCondition::Neumann, vec![], Method::Fem).unwrap();
        assert_eq!(heat_trace(&s, &[0.1, 1.0], 1e-6).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(heat_trace(&s, &[0.0], 1e-6), Err(Error::Precondition(_))));
    }

    #[test]
    fn unit_square_value() {
        let s = rectangle_exact_spectrum(1.0, 1.0, BoundaryCondition::Neumann, 4e4).unwrap();
        let t = 0.01;
        let v = heat_trace(&s, &[t], 1e-6).unwrap()[0];
        let expansion = 1.0 / (4.0 * PI * t) + 4.0 / (8.0 * (PI * t).sqrt()) + 0.25;
        assert!((v / expansion - 1.0).abs() < 0.005);
        assert!(matches!(heat_trace(&s, &[1e-4], 1e-6), Err(Error::Tail { .. })));
    }

    #[test]
    fn synthetic_round_trip() {
        let (a, l, c0) = (1.5, 3.0 + 5f64.sqrt(), 0.3125);
        let ts = geometric_grid(0.005, 0.05, 12);
        let values: Vec<f64> =
            ts.iter().map(|t| a / (4.0 * PI * t) + l / (8.0 * (PI * t).sqrt()) + c0).collect();
        let fit = fit_heat_invariants(&values, &ts, BoundaryCondition::Neumann, 1e10).unwrap();
        assert_relative_eq!(fit.recovered.area, a, epsilon = 1e-10);
        assert_relative_eq!(fit.recovered.perimeter, l, epsilon = 1e-10);
        assert_relative_eq!(fit.recovered.corner_sum, c0, epsilon = 1e-10);
        assert!(fit.residual < 1e-10);
    }

    #[test]
    fn square_recovery_both_conditions() {
        let ts = geometric_grid(0.005, 0.05, 20);
        for bc in [BoundaryCondition::Neumann, BoundaryCondition::Dirichlet] {
            let s = rectangle_exact_spectrum(1.0, 1.0, bc, 4e4).unwrap();
            let fit = fit_heat_invariants(&heat_trace(&s, &ts, 1e-6).unwrap(), &ts, bc, 1e10).unwrap();
            assert!((fit.recovered.area - 1.0).abs() < 0.01);
            assert!((fit.recovered.perimeter - 4.0).abs() < 0.08);
            assert!((fit.recovered.corner_sum - 0.25).abs() < 0.025);
            assert_relative_eq!(fit.angle_invariant(), 8.0 / (PI * PI), epsilon = 1e-6);
        }
    }

    #[test]
    fn fit_preconditions() {
        let ts = geometric_grid(0.01, 0.05, 10);
        assert!(matches!(
            fit_heat_invariants(&vec![1.0; 10], &ts, BoundaryCondition::Neumann, 1e10),
            Err(Error::Precondition(_))
        ));
        let ts = geometric_grid(0.01, 0.1, 10);
        assert!(matches!(
            fit_heat_invariants(&vec![1.0; 10], &ts, BoundaryCondition::Neumann, 10.0),
            Err(Error::IllConditioned(_))
        ));
    }
}
