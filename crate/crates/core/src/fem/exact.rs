use std::f64::consts::PI;

use super::{BoundaryCondition, Method, SpectrumData};
use crate::{Error, Result};

/// All eigenvalues `pi^2 (m^2/a^2 + n^2/c^2) <= lambda_max` of an `a x c`
/// rectangle, with `m, n >= 0` (Neumann) or `m, n >= 1` (Dirichlet).
pub fn rectangle_exact_spectrum(a: f64, c: f64, bc: BoundaryCondition, lambda_max: f64) -> Result<SpectrumData> {
    if !(a > 0.0 && c > 0.0 && a.is_finite() && c.is_finite()) {
        return Err(Error::Precondition(format!("rectangle sides must be positive, got {a} x {c}")));
    }
    if !(lambda_max >= 0.0 && lambda_max.is_finite()) {
        return Err(Error::Precondition(format!("lambda_max must be finite and non-negative, got {lambda_max}")));
    }
    let start = match bc {
        BoundaryCondition::Neumann => 0u64,
        BoundaryCondition::Dirichlet => 1,
    };
    let mut values = Vec::new();
    let mut m = start;
    loop {
        let x = PI * PI * (m * m) as f64 / (a * a);
        if x > lambda_max {
            break;
        }
        let mut n = start;
        loop {
            let v = x + PI * PI * (n * n) as f64 / (c * c);
            if v > lambda_max {
                break;
            }
            values.push(v);
            n += 1;
        }
        m += 1;
    }
    values.sort_by(f64::total_cmp);
    Ok(SpectrumData {
        bc,
        eigenvalues: values,
        lambda_max_trust: lambda_max,
        lambda_complete: lambda_max,
        mesh_size: 0.0,
        method: Method::ExactRectangle,
    })
}

/// Spectrum of the double of an `a x c` rectangle: the pillowcase, i.e. the
/// flat torus `R^2 / (2a Z x 2c Z)` modulo `x -> -x`. Eigenvalues are
/// `pi^2 (m^2/a^2 + n^2/c^2)` over integer pairs `(m, n)` up to sign.
/// Tagged Neumann since constants are eigenfunctions.
pub fn rectangle_double_spectrum(a: f64, c: f64, lambda_max: f64) -> Result<SpectrumData> {
    let half = rectangle_exact_spectrum(a, c, BoundaryCondition::Neumann, lambda_max)?;
    // (m, n) and (m, -n) are distinct orbits when both entries are nonzero
    let x = |m: u64| PI * PI * (m * m) as f64 / (a * a);
    let y = |n: u64| PI * PI * (n * n) as f64 / (c * c);
    let mut values = Vec::with_capacity(4 * half.count());
    let mut m = 0;
    while x(m) <= lambda_max {
        let mut n = 0;
        while x(m) + y(n) <= lambda_max {
            let mult = if m > 0 && n > 0 { 2 } else { 1 };
            values.extend(std::iter::repeat_n(x(m) + y(n), mult));
            n += 1;
        }
        m += 1;
    }
    values.sort_by(f64::total_cmp);
    Ok(SpectrumData { eigenvalues: values, ..half })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn examples() {
        let s = rectangle_exact_spectrum(1.0, 1.0, BoundaryCondition::Neumann, 25.0).unwrap();
        let p2 = PI * PI;
        assert_eq!(s.eigenvalues, vec![0.0, p2, p2, 2.0 * p2]);
        assert_eq!(s.method, Method::ExactRectangle);

        let d = rectangle_exact_spectrum(1.0, 2.0, BoundaryCondition::Dirichlet, 15.0).unwrap();
        assert_eq!(d.eigenvalues.len(), 1);
        assert_relative_eq!(d.eigenvalues[0], 5.0 * p2 / 4.0, epsilon = 1e-13);

        let x = rectangle_exact_spectrum(1.3, 0.7, BoundaryCondition::Neumann, 900.0).unwrap();
        let y = rectangle_exact_spectrum(0.7, 1.3, BoundaryCondition::Neumann, 900.0).unwrap();
        assert_eq!(x.eigenvalues.len(), y.eigenvalues.len());
        for (u, v) in x.eigenvalues.iter().zip(&y.eigenvalues) {
            assert_relative_eq!(*u, *v, epsilon = 1e-12);
        }
        assert!(rectangle_exact_spectrum(0.0, 1.0, BoundaryCondition::Neumann, 10.0).is_err());
    }
}
