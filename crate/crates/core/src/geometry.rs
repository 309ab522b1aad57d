//! Canonical trapezoid parametrization and closed-form invariants.
//!
//! A trapezoid is stored as `(b, h, alpha, beta)`: the length `b` of the
//! short parallel side, the height `h`, and the two base angles with
//! `0 < beta <= alpha <= pi/2`. It is placed with the base on the x-axis, the
//! bottom-left vertex at the origin and the interior in the upper half-plane.
//! The angle `alpha` sits at the bottom-left corner, so the top-left vertex
//! has interior angle `pi - alpha`.
//!
//! Vertex ids run counterclockwise: 0 bottom-left, 1 bottom-right,
//! 2 top-right, 3 top-left. Edge `i` joins vertex `i` to vertex `i + 1`, so
//! edge 0 is the base, 1 the right leg, 2 the top and 3 the left leg.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::config::{ANGLE_ORDER_SLACK, RIGHT_ANGLE_TOL};
use crate::diffraction;
use crate::{Error, Result};

pub type Point = [f64; 2];

pub const BASE: usize = 0;
pub const RIGHT_LEG: usize = 1;
pub const TOP: usize = 2;
pub const LEFT_LEG: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrapezoidSpec {
    b: f64,
    h: f64,
    alpha: f64,
    beta: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrapezoid {
    b: f64,
    h: f64,
    alpha: f64,
    beta: f64,
}

impl<'de> Deserialize<'de> for TrapezoidSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawTrapezoid::deserialize(d)?;
        TrapezoidSpec::new(raw.b, raw.h, raw.alpha, raw.beta).map_err(serde::de::Error::custom)
    }
}

/// Validates `(b, h, alpha, beta)`. Angles within [`RIGHT_ANGLE_TOL`] of
/// `pi/2` are snapped to exactly `pi/2`.
pub fn make_trapezoid(b: f64, h: f64, alpha: f64, beta: f64) -> Result<TrapezoidSpec> {
    TrapezoidSpec::new(b, h, alpha, beta)
}

impl TrapezoidSpec {
    pub fn new(b: f64, h: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::Domain(format!("top length b must be positive, got {b}")));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Domain(format!("height h must be positive, got {h}")));
        }
        let alpha = snap_right(alpha);
        let mut beta = snap_right(beta);
        for (name, a) in [("alpha", alpha), ("beta", beta)] {
            if !(a.is_finite() && a > 0.0 && a <= FRAC_PI_2) {
                return Err(Error::Domain(format!("{name} = {a} is outside (0, pi/2]")));
            }
        }
        if beta > alpha {
            if beta - alpha <= ANGLE_ORDER_SLACK {
                beta = alpha;
            } else {
                return Err(Error::Domain(format!(
                    "base angles must satisfy beta <= alpha, got alpha = {alpha}, beta = {beta}"
                )));
            }
        }
        Ok(Self { b, h, alpha, beta })
    }

    /// Axis-aligned rectangle of width `width` and height `height`.
    pub fn rectangle(width: f64, height: f64) -> Result<Self> {
        Self::new(width, height, FRAC_PI_2, FRAC_PI_2)
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_rectangle(&self) -> bool {
        self.alpha == FRAC_PI_2 && self.beta == FRAC_PI_2
    }

    /// Length of the base, `b + h (cot alpha + cot beta)`.
    pub fn base(&self) -> f64 {
        self.b + self.h * (cot(self.alpha) + cot(self.beta))
    }

    pub fn area(&self) -> f64 {
        self.b * self.h + 0.5 * self.h * self.h * (cot(self.alpha) + cot(self.beta))
    }

    pub fn perimeter(&self) -> f64 {
        let (l, lp) = self.legs();
        self.base() + self.b + l + lp
    }

    /// Left and right leg lengths `(h csc alpha, h csc beta)`.
    pub fn legs(&self) -> (f64, f64) {
        (self.h / self.alpha.sin(), self.h / self.beta.sin())
    }

    pub fn vertices(&self) -> [Point; 4] {
        let base = self.base();
        let left = self.h * cot(self.alpha);
        [[0.0, 0.0], [base, 0.0], [left + self.b, self.h], [left, self.h]]
    }

    /// Interior angles at vertices 0..4.
    pub fn interior_angles(&self) -> [f64; 4] {
        [self.alpha, self.beta, PI - self.beta, PI - self.alpha]
    }

    pub fn diameter(&self) -> f64 {
        let v = self.vertices();
        let mut d: f64 = 0.0;
        for i in 0..4 {
            for j in i + 1..4 {
                d = d.max(dist(v[i], v[j]));
            }
        }
        d
    }

    /// Horizontal extent `[x0, x0 + b]` of the inner rectangle under the top edge.
    pub fn inner_rectangle_span(&self) -> (f64, f64) {
        let x0 = self.h * cot(self.alpha);
        (x0, x0 + self.b)
    }

    /// Whether `p` lies in the closed trapezoid, with slack `tol`.
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        let v = self.vertices();
        (0..4).all(|i| {
            let a = v[i];
            let c = v[(i + 1) % 4];
            let len = dist(a, c);
            let cross = (c[0] - a[0]) * (p[1] - a[1]) - (c[1] - a[1]) * (p[0] - a[0]);
            cross / len >= -tol
        })
    }
}

impl std::fmt::Display for TrapezoidSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "trapezoid(b={}, h={}, alpha={}, beta={})", self.b, self.h, self.alpha, self.beta)
    }
}

fn snap_right(a: f64) -> f64 {
    if (a - FRAC_PI_2).abs() < RIGHT_ANGLE_TOL {
        FRAC_PI_2
    } else {
        a
    }
}

/// Cotangent with `cot(pi/2) = 0` exactly.
pub fn cot(a: f64) -> f64 {
    if a == FRAC_PI_2 {
        0.0
    } else {
        a.cos() / a.sin()
    }
}

pub fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedGeometry {
    pub base: f64,
    pub legs: (f64, f64),
    pub area: f64,
    pub perimeter: f64,
    pub inner_rectangle_area: f64,
    pub vertices: [Point; 4],
}

pub fn derived_quantities(t: &TrapezoidSpec) -> DerivedGeometry {
    DerivedGeometry {
        base: t.base(),
        legs: t.legs(),
        area: t.area(),
        perimeter: t.perimeter(),
        inner_rectangle_area: t.b * t.h,
        vertices: t.vertices(),
    }
}

/// `F(a) = 1 / (a (pi - a))`, the per-angle term of the angle invariant.
pub(crate) fn angle_term(a: f64) -> f64 {
    1.0 / (a * (PI - a))
}

/// Angle invariant `q = 1/(alpha(pi - alpha)) + 1/(beta(pi - beta))`.
///
/// The value is at least `8/pi^2`, with equality exactly for rectangles.
pub fn angle_invariant_q(alpha: f64, beta: f64) -> Result<f64> {
    for a in [alpha, beta] {
        if !(a > 0.0 && a <= FRAC_PI_2 + RIGHT_ANGLE_TOL) {
            return Err(Error::Domain(format!("angle {a} is outside (0, pi/2]")));
        }
    }
    Ok(angle_term(alpha) + angle_term(beta))
}

/// Sum of the corner terms `(pi^2 - theta^2) / (24 pi theta)` of a trapezoid
/// in terms of its angle invariant.
pub fn corner_sum_from_q(q: f64) -> f64 {
    (PI * PI * q - 2.0) / 24.0
}

/// Inverse of [`corner_sum_from_q`].
pub fn q_from_corner_sum(corner_sum: f64) -> f64 {
    (24.0 * corner_sum + 2.0) / (PI * PI)
}

/// Heat-trace corner sum computed directly from a list of interior angles.
pub fn corner_sum(angles: &[f64]) -> f64 {
    angles.iter().map(|&t| (PI * PI - t * t) / (24.0 * PI * t)).sum()
}

/// The orthic (Fagnano) triangle of the triangle that extends the trapezoid
/// past its top edge: three points on the left leg, base and right leg.
///
/// `None` when the extending triangle is not acute, when either base angle
/// is a right angle, or when a vertex of the orthic triangle lies above the
/// top edge.
pub fn orthic_triangle(t: &TrapezoidSpec) -> Option<[Point; 3]> {
    let (alpha, beta) = (t.alpha, t.beta);
    if alpha == FRAC_PI_2 || beta == FRAC_PI_2 || alpha + beta <= FRAC_PI_2 {
        return None;
    }
    let base = t.base();
    // Feet of the altitudes: from the right base vertex onto the left leg
    // line, from the apex onto the base, from the left base vertex onto the
    // right leg line.
    let on_left = {
        let r = base * alpha.cos();
        [r * alpha.cos(), r * alpha.sin()]
    };
    let on_right = {
        let r = base * beta.cos();
        [base - r * beta.cos(), r * beta.sin()]
    };
    let apex_x = base * beta.sin() * alpha.cos() / (alpha + beta).sin();
    let on_base = [apex_x, 0.0];
    let tol = 1e-12 * t.diameter();
    let pts = [on_left, on_base, on_right];
    if pts.iter().all(|&p| t.contains(p, tol)) {
        Some(pts)
    } else {
        None
    }
}

/// Length `2 B sin(alpha) sin(beta)` of the orthic triangle when it exists
/// inside the trapezoid.
pub fn orthic_length(t: &TrapezoidSpec) -> Option<f64> {
    orthic_triangle(t).map(|_| 2.0 * t.base() * t.alpha.sin() * t.beta.sin())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    ClosedForm,
    HeatFit,
    WaveFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sourced<T> {
    pub value: T,
    pub source: Source,
}

impl<T> Sourced<T> {
    pub fn new(value: T, source: Source) -> Self {
        Self { value, source }
    }
}

/// Leading amplitude constant of the Neumann wave trace at `t = 2b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "value", rename_all = "snake_case")]
pub enum AmplitudeConstant {
    /// Both top vertices diffract (`alpha != pi/2`).
    CAlphaBeta(f64),
    /// Only the top-right vertex diffracts (`alpha = pi/2`).
    CBetaRightAngle(f64),
}

impl AmplitudeConstant {
    pub fn value(&self) -> f64 {
        match *self {
            AmplitudeConstant::CAlphaBeta(v) | AmplitudeConstant::CBetaRightAngle(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantSet {
    pub area: Sourced<f64>,
    pub perimeter: Sourced<f64>,
    pub q: Sourced<f64>,
    pub height: Option<Sourced<f64>>,
    pub top: Option<Sourced<f64>>,
    pub amplitude: Option<Sourced<AmplitudeConstant>>,
}

impl InvariantSet {
    /// Checks the structural constraints every invariant set must satisfy.
    pub fn validate(&self) -> Result<()> {
        let q_min = 8.0 / (PI * PI);
        if !(self.area.value > 0.0) {
            return Err(Error::Infeasible(format!("area {} must be positive", self.area.value)));
        }
        if !(self.perimeter.value > 0.0) {
            return Err(Error::Infeasible(format!(
                "perimeter {} must be positive",
                self.perimeter.value
            )));
        }
        if self.q.value < q_min * (1.0 - 1e-12) {
            return Err(Error::Infeasible(format!("q = {} is below 8/pi^2", self.q.value)));
        }
        if let (Some(h), Some(b)) = (self.height, self.top) {
            if self.area.value < b.value * h.value * (1.0 - 1e-12) {
                return Err(Error::Infeasible("area is smaller than b*h".into()));
            }
        }
        Ok(())
    }
}

/// All closed-form invariants of `t`.
pub fn forward_invariants(t: &TrapezoidSpec) -> InvariantSet {
    let cf = |v| Sourced::new(v, Source::ClosedForm);
    let amplitude = if t.is_rectangle() {
        None
    } else if t.alpha == FRAC_PI_2 {
        diffraction::c_beta(t.beta).ok().map(AmplitudeConstant::CBetaRightAngle)
    } else {
        diffraction::c_alpha_beta(t.alpha, t.beta).ok().map(AmplitudeConstant::CAlphaBeta)
    };
    InvariantSet {
        area: cf(t.area()),
        perimeter: cf(t.perimeter()),
        q: cf(angle_term(t.alpha) + angle_term(t.beta)),
        height: Some(cf(t.h)),
        top: Some(cf(t.b)),
        amplitude: amplitude.map(|a| Sourced::new(a, Source::ClosedForm)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn atan2_trap() -> TrapezoidSpec {
        let a = 2f64.atan();
        TrapezoidSpec::new(1.0, 1.0, a, a).unwrap()
    }

    #[test]
    fn validation() {
        assert!(make_trapezoid(1.0, 1.0, FRAC_PI_2, FRAC_PI_2).unwrap().is_rectangle());
        let t = atan2_trap();
        assert_relative_eq!(t.base(), 2.0, epsilon = 1e-14);
        assert!(matches!(make_trapezoid(1.0, 1.0, PI / 4.0, PI / 3.0), Err(Error::Domain(_))));
        assert!(make_trapezoid(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(make_trapezoid(1.0, -1.0, 1.0, 1.0).is_err());
        assert!(make_trapezoid(1.0, 1.0, 1.7, 1.0).is_err());
        assert!(make_trapezoid(1.0, 1.0, 1.0, 0.0).is_err());
        assert!(make_trapezoid(1.0, f64::NAN, 1.0, 1.0).is_err());
    }

    #[test]
    fn right_angle_snapping() {
        let t = make_trapezoid(1.0, 1.0, FRAC_PI_2 + 1e-12, 1.0).unwrap();
        assert_eq!(t.alpha(), FRAC_PI_2);
        assert_eq!(cot(t.alpha()), 0.0);
    }

    #[test]
    fn derived_examples() {
        let r = derived_quantities(&TrapezoidSpec::rectangle(1.0, 1.0).unwrap());
        assert_eq!((r.base, r.area, r.perimeter), (1.0, 1.0, 4.0));
        assert_eq!(r.legs, (1.0, 1.0));

        let d = derived_quantities(&atan2_trap());
        let s5 = 5f64.sqrt();
        assert_relative_eq!(d.base, 2.0, epsilon = 1e-14);
        assert_relative_eq!(d.area, 1.5, epsilon = 1e-14);
        assert_relative_eq!(d.perimeter, 3.0 + s5, epsilon = 1e-14);
        assert_relative_eq!(d.legs.0, s5 / 2.0, epsilon = 1e-14);
        assert_relative_eq!(d.legs.1, s5 / 2.0, epsilon = 1e-14);

        let d = derived_quantities(&make_trapezoid(1.0, 2.0, FRAC_PI_2, PI / 4.0).unwrap());
        assert_relative_eq!(d.base, 3.0, epsilon = 1e-14);
        assert_relative_eq!(d.area, 4.0, epsilon = 1e-14);
        assert_relative_eq!(d.perimeter, 6.0 + 2.0 * 2f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn q_examples() {
        let pi2 = PI * PI;
        assert_eq!(angle_invariant_q(FRAC_PI_2, FRAC_PI_2).unwrap(), 8.0 / pi2);
        assert_relative_eq!(angle_invariant_q(PI / 3.0, PI / 3.0).unwrap(), 9.0 / pi2, epsilon = 1e-15);
        assert_relative_eq!(
            angle_invariant_q(FRAC_PI_2, PI / 3.0).unwrap(),
            17.0 / (2.0 * pi2),
            epsilon = 1e-15
        );
        assert!(angle_invariant_q(2.0, 1.0).is_err());
        assert!(angle_invariant_q(0.0, 1.0).is_err());
    }

    #[test]
    fn corner_sum_matches_q() {
        let t = make_trapezoid(1.3, 0.7, 1.2, 0.4).unwrap();
        let q = angle_invariant_q(t.alpha(), t.beta()).unwrap();
        assert_relative_eq!(corner_sum(&t.interior_angles()), corner_sum_from_q(q), epsilon = 1e-14);
        assert_relative_eq!(q_from_corner_sum(corner_sum_from_q(q)), q, epsilon = 1e-14);
        // unit square: four right angles give 1/4
        assert_relative_eq!(corner_sum(&[FRAC_PI_2; 4]), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn orthic_examples() {
        assert_relative_eq!(orthic_length(&atan2_trap()).unwrap(), 16.0 / 5.0, epsilon = 1e-13);
        // obtuse apex
        assert!(orthic_length(&make_trapezoid(1.0, 1.0, 0.5, 0.5).unwrap()).is_none());
        assert!(orthic_length(&make_trapezoid(1.0, 1.0, FRAC_PI_2, 1.2).unwrap()).is_none());
        // tall trapezoid: the feet sit at height B sin(b) cos(b) < h
        let tall = make_trapezoid(1.0, 3.0, PI / 3.0, PI / 3.0).unwrap();
        let base = tall.base();
        assert_relative_eq!(orthic_length(&tall).unwrap(), 1.5 * base, epsilon = 1e-12);
        // too short: the feet on the legs lie above the top edge
        let short = make_trapezoid(5.0, 0.5, 1.2, 1.1).unwrap();
        assert!(orthic_length(&short).is_none());
    }

    #[test]
    fn orthic_perimeter_matches_closed_form() {
        let t = make_trapezoid(0.8, 2.5, 1.3, 1.0).unwrap();
        let p = orthic_triangle(&t).unwrap();
        let per = dist(p[0], p[1]) + dist(p[1], p[2]) + dist(p[2], p[0]);
        assert_relative_eq!(per, orthic_length(&t).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn forward_invariant_examples() {
        let r = forward_invariants(&TrapezoidSpec::rectangle(1.0, 1.0).unwrap());
        assert_eq!(r.area.value, 1.0);
        assert_eq!(r.perimeter.value, 4.0);
        assert_eq!(r.q.value, 8.0 / (PI * PI));
        assert!(r.amplitude.is_none());
        assert_eq!(r.area.source, Source::ClosedForm);

        let inv = forward_invariants(&atan2_trap());
        assert_relative_eq!(inv.q.value, 2.0 * angle_term(2f64.atan()), epsilon = 1e-15);
        assert!(matches!(inv.amplitude.unwrap().value, AmplitudeConstant::CAlphaBeta(_)));

        let right = forward_invariants(&make_trapezoid(1.0, 1.0, FRAC_PI_2, PI / 3.0).unwrap());
        assert!(matches!(right.amplitude.unwrap().value, AmplitudeConstant::CBetaRightAngle(_)));
        right.validate().unwrap();
    }

    #[test]
    fn strict_json_input() {
        let t: TrapezoidSpec = serde_json::from_str(r#"{"b":1,"h":2,"alpha":1.2,"beta":1.0}"#).unwrap();
        assert_eq!(t.h(), 2.0);
        assert!(serde_json::from_str::<TrapezoidSpec>(r#"{"b":1,"h":2,"alpha":1.2}"#).is_err());
        assert!(serde_json::from_str::<TrapezoidSpec>(r#"{"b":1,"h":2,"alpha":1.2,"beta":1,"x":0}"#).is_err());
        assert!(serde_json::from_str::<TrapezoidSpec>(r#"{"b":1,"h":2,"alpha":1.0,"beta":1.2}"#).is_err());
    }

    fn shoelace(v: &[Point; 4]) -> f64 {
        (0..4)
            .map(|i| {
                let (a, b) = (v[i], v[(i + 1) % 4]);
                a[0] * b[1] - b[0] * a[1]
            })
            .sum::<f64>()
            / 2.0
    }

    fn arb_trapezoid() -> impl Strategy<Value = TrapezoidSpec> {
        (0.1f64..5.0, 0.1f64..5.0, 0.05f64..FRAC_PI_2, 0.0f64..1.0).prop_map(|(b, h, a, f)| {
            let beta = (a * f).max(0.02);
            TrapezoidSpec::new(b, h, a.max(beta), beta).unwrap()
        })
    }

    proptest! {
        #[test]
        fn base_exceeds_top(t in arb_trapezoid()) {
            prop_assert!(t.base() >= t.b());
            prop_assert!(t.base() > t.b() || t.is_rectangle());
        }

        #[test]
        fn area_and_perimeter_match_vertices(t in arb_trapezoid()) {
            let v = t.vertices();
            let area = shoelace(&v);
            prop_assert!(area > 0.0, "vertices must be counterclockwise");
            prop_assert!((area - t.area()).abs() <= 1e-12 * t.area());
            let per: f64 = (0..4).map(|i| dist(v[i], v[(i + 1) % 4])).sum();
            prop_assert!((per - t.perimeter()).abs() <= 1e-12 * t.perimeter());
            let half = |a: f64| (a / 2.0).tan();
            let excess = t.h() * (half(t.alpha()) + half(t.beta()));
            prop_assert!((t.perimeter() - 2.0 * t.base() - excess).abs() <= 1e-11 * t.perimeter());
            prop_assert!(excess > 0.0);
        }

        #[test]
        fn q_bounds_and_monotonicity(a in 0.01f64..1.5, b in 0.01f64..1.5, d in 1e-4f64..0.05) {
            let q = angle_invariant_q(a, b).unwrap();
            prop_assert!(q > 8.0 / (PI * PI));
            prop_assert!(angle_invariant_q(a + d, b).unwrap() < q);
            prop_assert!(angle_invariant_q(a, b + d).unwrap() < q);
        }
    }
}
