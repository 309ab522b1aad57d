//! Recovery of a trapezoid from its Neumann spectral invariants.
//!
//! Two closed-form paths exist. When the altitude orbit `2h` is the
//! shortest, `(A, L, h, b)` fix the half-angle tangents as the roots of a
//! quadratic ([`reconstruct_from_alhb`]). When the top-edge orbit `2b` is
//! the shortest, `(A, q, b, C)` fix the angles because the amplitude
//! constant `C` is strictly increasing along every level curve of `q`
//! ([`solve_angles_from_qc`]). The proof of that monotonicity reduces to
//! `G(theta)` being increasing, which [`monotonicity_scan`] checks on a
//! grid.
//!
//! [`end_to_end_reconstruct`] runs the full pipeline on a spectrum: heat
//! fit, wave-trace peaks, case decision and the matching reconstruction.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::billiards::named_orbits;
use crate::config::Tolerances;
use crate::diffraction::c_alpha_beta;
use crate::error::StageExt;
use crate::fem::BoundaryCondition;
use crate::geometry::{cot, AmplitudeConstant, InvariantSet, Source, Sourced, TrapezoidSpec};
use crate::traces::{
    check_k_range, detect_peaks, fit_amplitude, fit_heat_invariants, geometric_grid, heat_trace, max_complete_k,
    wave_transform, HeatFit, PeakOptions, SpectralMeasure, WavePeak,
};
use crate::{Error, Result};

const Q_MIN: f64 = 8.0 / (PI * PI);

/// Level curves are evaluated up to `pi/2 - LEVEL_EPS`.
pub const LEVEL_EPS: f64 = 1e-10;
const BISECTION_MAX_ITER: usize = 200;

fn open_angle(name: &str, a: f64) -> Result<()> {
    if a > 0.0 && a < PI {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {a} must lie in (0, pi)")))
    }
}

/// `F(alpha) = 1/(alpha (pi - alpha))`.
pub fn f(alpha: f64) -> Result<f64> {
    open_angle("alpha", alpha)?;
    Ok(1.0 / (alpha * (PI - alpha)))
}

/// `F'(alpha) = -(pi - 2 alpha) / (alpha^2 (pi - alpha)^2)`.
pub fn f_prime(alpha: f64) -> Result<f64> {
    open_angle("alpha", alpha)?;
    Ok(-(PI - 2.0 * alpha) / (alpha * (PI - alpha)).powi(2))
}

/// `G(theta) = pi^3 theta^2 / ((pi + theta)(pi - theta)) (1/sin theta + 1/(pi + theta))`.
pub fn g(theta: f64) -> Result<f64> {
    open_angle("theta", theta)?;
    let pre = PI.powi(3) * theta * theta / ((PI + theta) * (PI - theta));
    Ok(pre * (1.0 / theta.sin() + 1.0 / (PI + theta)))
}

/// `(d/dtheta) log G`, differentiated term by term.
pub fn log_g_slope(theta: f64) -> Result<f64> {
    open_angle("theta", theta)?;
    let inner = 1.0 / theta.sin() + 1.0 / (PI + theta);
    let inner_prime = -theta.cos() / theta.sin().powi(2) - 1.0 / (PI + theta).powi(2);
    Ok(2.0 / theta - 1.0 / (PI + theta) + 1.0 / (PI - theta) + inner_prime / inner)
}

/// `G'(theta) = G(theta) (d/dtheta) log G`.
pub fn g_prime(theta: f64) -> Result<f64> {
    Ok(g(theta)? * log_g_slope(theta)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub n: usize,
    pub min_g_prime: f64,
    pub argmin: f64,
    /// Minimum of `(d/dtheta) log G` on `[pi/2, pi - 1e-3]`.
    pub min_log_slope_upper: f64,
    /// Minimum of `(d/dtheta) log G` on `(1e-3, pi/3]`.
    pub min_log_slope_lower: f64,
    pub positive: bool,
    pub upper_bound_holds: bool,
    pub lower_bound_holds: bool,
}

impl MonotonicityReport {
    pub fn passed(&self) -> bool {
        self.positive && self.upper_bound_holds && self.lower_bound_holds
    }
}

/// `G'` on `n` uniform points of `[1e-3, pi - 1e-3]`, with the explicit
/// slope bounds `8/(3 pi)` on `[pi/2, pi)` and `0.09` on `(0, pi/3]`.
pub fn monotonicity_scan(n: usize) -> Result<MonotonicityReport> {
    if n < 100 {
        return Err(Error::Precondition(format!("monotonicity scan needs n >= 100, got {n}")));
    }
    let (lo, hi) = (1e-3, PI - 1e-3);
    let mut report = MonotonicityReport {
        n,
        min_g_prime: f64::INFINITY,
        argmin: lo,
        min_log_slope_upper: f64::INFINITY,
        min_log_slope_lower: f64::INFINITY,
        positive: false,
        upper_bound_holds: false,
        lower_bound_holds: false,
    };
    for i in 0..n {
        let theta = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let gp = g_prime(theta)?;
        let slope = log_g_slope(theta)?;
        if gp < report.min_g_prime {
            report.min_g_prime = gp;
            report.argmin = theta;
        }
        if theta >= FRAC_PI_2 {
            report.min_log_slope_upper = report.min_log_slope_upper.min(slope);
        }
        if theta <= PI / 3.0 {
            report.min_log_slope_lower = report.min_log_slope_lower.min(slope);
        }
    }
    report.positive = report.min_g_prime > 0.0;
    report.upper_bound_holds = report.min_log_slope_upper >= 8.0 / (3.0 * PI);
    report.lower_bound_holds = report.min_log_slope_lower >= 0.09;
    Ok(report)
}

/// `{(alpha, beta) : F(alpha) + F(beta) = q, beta <= alpha <= pi/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelCurve {
    pub q: f64,
    /// Isosceles end point, `F(alpha0) = q/2`.
    pub alpha0: f64,
}

impl LevelCurve {
    /// `beta(alpha) = (pi/2)(1 - sqrt(1 - 4/(pi^2 (q - F(alpha)))))` on `[alpha0, pi/2]`.
    pub fn beta(&self, alpha: f64) -> Result<f64> {
        if !(alpha >= self.alpha0 * (1.0 - 1e-15) && alpha <= FRAC_PI_2) {
            return Err(Error::Domain(format!("alpha = {alpha} is outside [{}, pi/2]", self.alpha0)));
        }
        if alpha <= self.alpha0 {
            return Ok(self.alpha0);
        }
        Ok(beta_from_remainder(self.q - f(alpha)?))
    }

    /// `C_{alpha, beta(alpha)}`; strictly increasing in `alpha`.
    pub fn amplitude(&self, alpha: f64) -> Result<f64> {
        c_alpha_beta(alpha, self.beta(alpha)?)
    }
}

/// The angle `beta <= pi/2` with `F(beta) = r`.
fn beta_from_remainder(r: f64) -> f64 {
    let x = (1.0 - 4.0 / (PI * PI * r)).max(0.0);
    FRAC_PI_2 * (1.0 - x.sqrt())
}

pub fn level_curve(q: f64) -> Result<LevelCurve> {
    if !(q.is_finite() && q >= Q_MIN * (1.0 - 1e-12)) {
        return Err(Error::Domain(format!("q = {q} is below 8/pi^2")));
    }
    let x = (1.0 - Q_MIN / q).max(0.0);
    Ok(LevelCurve { q, alpha0: FRAC_PI_2 * (1.0 - x.sqrt()) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleVariant {
    General,
    RightAngle,
}

/// Base angles from `(q, C)`.
///
/// `General` bisects `C_{alpha, beta(alpha)} = C` on `[alpha0, pi/2 - LEVEL_EPS]`
/// down to rounding; `RightAngle` sets `alpha = pi/2` and ignores `C`.
pub fn solve_angles_from_qc(q: f64, c: f64, variant: AngleVariant) -> Result<(f64, f64)> {
    if !(q > Q_MIN) {
        return Err(Error::Domain(format!("q = {q} must exceed 8/pi^2")));
    }
    match variant {
        AngleVariant::RightAngle => {
            let r = q - f(FRAC_PI_2)?;
            Ok((FRAC_PI_2, beta_from_remainder(r)))
        }
        AngleVariant::General => {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Domain(format!("C = {c} must be positive")));
            }
            let curve = level_curve(q)?;
            let (mut lo, mut hi) = (curve.alpha0, FRAC_PI_2 - LEVEL_EPS);
            let (g_lo, g_hi) = (curve.amplitude(lo)?, curve.amplitude(hi)?);
            if c < g_lo * (1.0 - 1e-12) || c > g_hi {
                return Err(Error::NoSolution(format!(
                    "C = {c} is outside the attainable range [{g_lo}, {g_hi}] for q = {q}"
                )));
            }
            if c <= g_lo {
                return Ok((curve.alpha0, curve.alpha0));
            }
            for _ in 0..BISECTION_MAX_ITER {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if curve.amplitude(mid)? < c {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let alpha = 0.5 * (lo + hi);
            Ok((alpha, curve.beta(alpha)?))
        }
    }
}

/// `(b, h, alpha, beta)` from area, perimeter, height and top length.
///
/// `tan(alpha/2)` and `tan(beta/2)` are the roots of `z^2 - S z + Q` with
/// `S = (L - 2B)/h`, `P = (L - 2b)/h` and `Q = S/P`.
pub fn reconstruct_from_alhb(a: f64, l: f64, h: f64, b: f64) -> Result<TrapezoidSpec> {
    if !(l > 0.0 && h > 0.0 && b > 0.0) {
        return Err(Error::Precondition(format!("L, h, b must be positive, got {l}, {h}, {b}")));
    }
    if a < b * h * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!("area {a} is below b*h = {}", b * h)));
    }
    let big_b = 2.0 * a / h - b;
    if big_b < b * (1.0 - 1e-12) {
        return Err(Error::Infeasible(format!("base {big_b} is shorter than the top {b}")));
    }
    let p = (l - 2.0 * b) / h;
    let s = (l - 2.0 * big_b) / h;
    if !(s > 0.0 && p > 0.0) {
        return Err(Error::Infeasible(format!("half-angle tangent sum {s} must be positive")));
    }
    let q = s / p;
    let disc = s * s - 4.0 * q;
    if disc < -1e-12 {
        return Err(Error::Infeasible(format!("discriminant {disc} is negative")));
    }
    // rounding leaves |disc| ~ eps S^2 at a double root
    let disc = if disc.abs() <= 64.0 * f64::EPSILON * s * s { 0.0 } else { disc };
    let z_big = 0.5 * (s + disc.max(0.0).sqrt());
    let z_small = q / z_big;
    TrapezoidSpec::new(b, h, 2.0 * z_big.atan(), 2.0 * z_small.atan())
        .map_err(|e| Error::Infeasible(format!("recovered angles are invalid: {e}")))
}

/// Height from `A = b h + h^2 (cot alpha + cot beta)/2`.
fn height_from_area(a: f64, b: f64, alpha: f64, beta: f64) -> f64 {
    let s = cot(alpha) + cot(beta);
    // 2A / (b + sqrt(b^2 + 2 A s)) avoids cancellation as s -> 0
    2.0 * a / (b + (b * b + 2.0 * a * s).sqrt())
}

/// `(b, h, alpha, beta)` from area, angle invariant, top length and the
/// top-edge amplitude constant.
pub fn reconstruct_from_aqbc(a: f64, q: f64, b: f64, amplitude: AmplitudeConstant) -> Result<TrapezoidSpec> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Precondition(format!("A and b must be positive, got {a}, {b}")));
    }
    let (alpha, beta) = match amplitude {
        AmplitudeConstant::CAlphaBeta(c) => solve_angles_from_qc(q, c, AngleVariant::General)?,
        AmplitudeConstant::CBetaRightAngle(_) => solve_angles_from_qc(q, 0.0, AngleVariant::RightAngle)?,
    };
    trapezoid_from_angles(a, b, alpha, beta)
}

fn trapezoid_from_angles(a: f64, b: f64, alpha: f64, beta: f64) -> Result<TrapezoidSpec> {
    let h = height_from_area(a, b, alpha, beta);
    TrapezoidSpec::new(b, h, alpha, beta).map_err(|e| Error::Infeasible(e.to_string()))
}

/// Rectangle with sides the roots of `z^2 - (L/2) z + A`, shorter side on top.
pub fn reconstruct_rectangle(a: f64, l: f64) -> Result<TrapezoidSpec> {
    if !(a > 0.0 && l > 0.0) {
        return Err(Error::Precondition(format!("A and L must be positive, got {a}, {l}")));
    }
    let disc = l * l / 4.0 - 4.0 * a;
    if disc < -1e-9 * l * l {
        return Err(Error::Infeasible(format!("L^2 = {} is below 16 A = {}", l * l, 16.0 * a)));
    }
    let long = 0.5 * (0.5 * l + disc.max(0.0).sqrt());
    let short = a / long;
    TrapezoidSpec::rectangle(short, long).map_err(|e| Error::Infeasible(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconstructionPath {
    Rectangle,
    /// Shortest orbit is the altitude family at `2h`.
    Altitude,
    /// Shortest orbit is the top edge at `2b`, both top vertices diffractive.
    TopEdgeGeneral,
    /// Shortest orbit is the top edge at `2b` with a right angle at `alpha`.
    TopEdgeRightAngle,
}

/// Expected `k` exponent of each path's leading singularity.
pub const ALTITUDE_EXPONENT: f64 = 0.5;
pub const TOP_EDGE_EXPONENT: f64 = -1.0;
pub const RIGHT_ANGLE_EXPONENT: f64 = -0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanThresholds {
    pub rectangle_q: f64,
    pub order_window: f64,
    pub altitude_exponent: f64,
    pub top_edge_exponent: f64,
    pub right_angle_exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionPlan {
    pub path: ReconstructionPath,
    /// Relative distance of `q` from `8/pi^2`.
    pub q_offset: f64,
    pub peak: Option<WavePeak>,
    /// Half the peak length: `h` on the altitude path, `b` on the top-edge paths.
    pub half_length: Option<f64>,
    pub thresholds: PlanThresholds,
}

/// Selects the reconstruction path from the invariants and the detected
/// peaks. The first peak carrying an order estimate is the shortest orbit;
/// its `k` exponent names it.
pub fn decide_case(inv: &InvariantSet, peaks: &[WavePeak], tol: &Tolerances) -> Result<ReconstructionPlan> {
    let thresholds = PlanThresholds {
        rectangle_q: tol.rectangle_q,
        order_window: tol.order_window,
        altitude_exponent: ALTITUDE_EXPONENT,
        top_edge_exponent: TOP_EDGE_EXPONENT,
        right_angle_exponent: RIGHT_ANGLE_EXPONENT,
    };
    let q_offset = (inv.q.value - Q_MIN) / Q_MIN;
    if q_offset.abs() < tol.rectangle_q {
        return Ok(ReconstructionPlan {
            path: ReconstructionPath::Rectangle,
            q_offset,
            peak: None,
            half_length: None,
            thresholds,
        });
    }
    let mut sorted: Vec<&WavePeak> = peaks.iter().collect();
    sorted.sort_by(|a, b| a.t0.total_cmp(&b.t0));
    let peak = sorted
        .into_iter()
        .find(|p| p.order_estimate.is_some())
        .ok_or_else(|| Error::Ambiguous("no wave-trace peak carries an order estimate".into()))?;
    let a = peak.order_estimate.unwrap_or(f64::NAN);
    let near = |target: f64| (a - target).abs() <= tol.order_window;
    let path = if near(ALTITUDE_EXPONENT) {
        ReconstructionPath::Altitude
    } else if near(TOP_EDGE_EXPONENT) {
        ReconstructionPath::TopEdgeGeneral
    } else if near(RIGHT_ANGLE_EXPONENT) {
        ReconstructionPath::TopEdgeRightAngle
    } else {
        return Err(Error::Ambiguous(format!(
            "first peak at t = {} has k exponent {a}, outside every order window",
            peak.t0
        )));
    };
    Ok(ReconstructionPlan { path, q_offset, peak: Some(peak.clone()), half_length: Some(peak.t0 / 2.0), thresholds })
}

/// Trapezoid from an invariant set without spectral data. Uses `(A, L, h, b)`
/// when both lengths are present, `(A, q, b, C)` when the top length and
/// amplitude are, and the rectangle formulas when `q` is within
/// `rectangle_q` of `8/pi^2`.
pub fn reconstruct_from_invariants(inv: &InvariantSet, tol: &Tolerances) -> Result<(TrapezoidSpec, ReconstructionPath)> {
    inv.validate()?;
    let (a, l, q) = (inv.area.value, inv.perimeter.value, inv.q.value);
    match (inv.height, inv.top, inv.amplitude) {
        (Some(h), Some(b), _) => Ok((reconstruct_from_alhb(a, l, h.value, b.value)?, ReconstructionPath::Altitude)),
        (_, Some(b), Some(c)) => {
            let path = match c.value {
                AmplitudeConstant::CAlphaBeta(_) => ReconstructionPath::TopEdgeGeneral,
                AmplitudeConstant::CBetaRightAngle(_) => ReconstructionPath::TopEdgeRightAngle,
            };
            Ok((reconstruct_from_aqbc(a, q, b.value, c.value)?, path))
        }
        _ if ((q - Q_MIN) / Q_MIN).abs() < tol.rectangle_q => {
            Ok((reconstruct_rectangle(a, l)?, ReconstructionPath::Rectangle))
        }
        _ => Err(Error::Ambiguous("invariants need h and b, or b and C, unless q = 8/pi^2".into())),
    }
}

/// Options for [`end_to_end_reconstruct`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconstructOptions {
    /// Gaussian window width; `0.15 sqrt(A)` when unset.
    pub window_width: Option<f64>,
    /// Peak scan range; `[6 w, 2 sqrt(A) + 3 w]` when unset.
    pub t_scan: Option<(f64, f64)>,
    pub k_step: f64,
    pub heat_points: usize,
    pub tolerances: Tolerances,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self { window_width: None, t_scan: None, k_step: 0.5, heat_points: 40, tolerances: Tolerances::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recovered {
    pub b: f64,
    pub h: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "B")]
    pub base: f64,
}

impl From<&TrapezoidSpec> for Recovered {
    fn from(t: &TrapezoidSpec) -> Self {
        Self { b: t.b(), h: t.h(), alpha: t.alpha(), beta: t.beta(), base: t.base() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub heat_fit: f64,
    /// Perimeter of the result minus the fitted perimeter.
    pub perimeter: f64,
    /// Area of the result minus the fitted area.
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub heat: HeatFit,
    /// `(t_min, t_max, points)` of the heat fit.
    pub heat_grid: (f64, f64, usize),
    pub invariants: InvariantSet,
    pub peaks: Vec<WavePeak>,
    pub plan: ReconstructionPlan,
    /// `(k_min, k_max, k_step)` of the amplitude fit.
    pub amplitude_grid: Option<(f64, f64, f64)>,
    /// The amplitude constant sat below the level curve's range and was
    /// projected onto the isosceles end point.
    pub fold_projected: bool,
    pub recovered: Recovered,
    pub residuals: Residuals,
    /// Named orbit lengths of the result. The orbit-isolation hypotheses
    /// cannot be checked from a finite spectrum; this is advisory only.
    pub advisory_orbit_lengths: Vec<f64>,
}

/// Heat fit on `[min(50/Lambda, t_hi/10), t_hi]` with `t_hi = 0.1 (2A/L)^2`,
/// where a first fit on `[50/Lambda, 500/Lambda]` supplies `A` and `L`.
pub fn staged_heat_fit<S: SpectralMeasure + ?Sized>(s: &S, opts: &ReconstructOptions) -> Result<(HeatFit, (f64, f64, usize))> {
    let tol = &opts.tolerances;
    let trust = s.lambda_max_trust();
    if !(trust > 0.0) {
        return Err(Error::Tail { rejected: vec![] });
    }
    let n = opts.heat_points.max(8);
    let fit_on = |lo: f64, hi: f64| -> Result<HeatFit> {
        let ts = geometric_grid(lo, hi, n);
        let values = heat_trace(s, &ts, tol.heat_tail)?;
        fit_heat_invariants(&values, &ts, s.bc(), tol.heat_condition)
    };
    let first = fit_on(50.0 / trust, 500.0 / trust)?;
    let r = 2.0 * first.recovered.area / first.recovered.perimeter;
    let hi = 0.1 * r * r;
    let lo = (50.0 / trust).min(hi / 10.0);
    Ok((fit_on(lo, hi)?, (lo, hi, n)))
}

/// Neumann spectrum to trapezoid: heat fit, peak scan, case decision and
/// reconstruction. Errors carry the label of the failing stage.
pub fn end_to_end_reconstruct<S: SpectralMeasure + ?Sized>(
    s: &S,
    opts: &ReconstructOptions,
) -> Result<(TrapezoidSpec, Diagnostics)> {
    let tol = &opts.tolerances;
    if s.bc() != BoundaryCondition::Neumann {
        return Err(Error::Precondition("the reconstruction theorem applies to Neumann spectra".into()).at_stage("input"));
    }
    let (heat, heat_grid) = staged_heat_fit(s, opts).stage("heat")?;
    let (area, perimeter) = (heat.recovered.area, heat.recovered.perimeter);
    let q = heat.angle_invariant();
    let hf = |v| Sourced::new(v, Source::HeatFit);
    let mut invariants =
        InvariantSet { area: hf(area), perimeter: hf(perimeter), q: hf(q), height: None, top: None, amplitude: None };

    let q_offset = (q - Q_MIN) / Q_MIN;
    let width = opts.window_width.unwrap_or(0.15 * area.sqrt());
    let peaks = if q_offset.abs() < tol.rectangle_q {
        Vec::new()
    } else {
        let k_hi = s.lambda_max_trust().sqrt().min(max_complete_k(s.lambda_complete(), width, tol.wave_tail));
        let k_hi = (k_hi / opts.k_step).floor() * opts.k_step;
        let k_grid = crate::config::octave_k_grid(k_hi, opts.k_step);
        let t_scan = opts.t_scan.unwrap_or((6.0 * width, 2.0 * area.sqrt() + 3.0 * width));
        let peak_opts = PeakOptions {
            median_factor: tol.peak_median_factor,
            relative_floor: tol.peak_relative_floor,
            r2_floor: tol.order_r2_floor,
            clean_r2: tol.peak_clean_r2,
            tail: tol.wave_tail,
            ..PeakOptions::default()
        };
        detect_peaks(s, t_scan, width, k_hi, &k_grid, &peak_opts).stage("peaks")?
    };
    let plan = decide_case(&invariants, &peaks, tol).stage("case")?;

    let mut amplitude_grid = None;
    let mut fold_projected = false;
    let result = match plan.path {
        ReconstructionPath::Rectangle => reconstruct_rectangle(area, perimeter),
        path => {
            let peak = plan.peak.as_ref().expect("non-rectangle plans carry a peak");
            let half = peak.t0 / 2.0;
            let (k_lo, k_hi, k_step) = peak.k_grid;
            let ks = crate::config::k_grid(k_lo, k_hi, k_step);
            check_k_range(s, width, &ks, tol.wave_tail).stage("amplitude")?;
            amplitude_grid = Some(peak.k_grid);
            let w = wave_transform(s, peak.t0, width, &ks, tol.wave_tail).stage("amplitude")?;
            match path {
                ReconstructionPath::Altitude => {
                    let (c, _) = fit_amplitude(&w, &ks, ALTITUDE_EXPONENT, 0.5).stage("amplitude")?;
                    // |W| ~ 2 b h k^{1/2} / sqrt(4 pi h)
                    let b = c * (4.0 * PI * half).sqrt() / (2.0 * half);
                    invariants.height = Some(Sourced::new(half, Source::WaveFit));
                    invariants.top = Some(Sourced::new(b, Source::WaveFit));
                    reconstruct_from_alhb(area, perimeter, half, b)
                }
                ReconstructionPath::TopEdgeGeneral => {
                    let (c, _) = fit_amplitude(&w, &ks, TOP_EDGE_EXPONENT, 1.0).stage("amplitude")?;
                    let amp = c / PI;
                    invariants.top = Some(Sourced::new(half, Source::WaveFit));
                    invariants.amplitude = Some(Sourced::new(AmplitudeConstant::CAlphaBeta(amp), Source::WaveFit));
                    match reconstruct_from_aqbc(area, q, half, AmplitudeConstant::CAlphaBeta(amp)) {
                        Err(Error::NoSolution(msg)) => {
                            let curve = level_curve(q).stage("reconstruct")?;
                            let g0 = curve.amplitude(curve.alpha0).stage("reconstruct")?;
                            if amp < g0 && amp >= g0 * (1.0 - tol.fold_slack) {
                                fold_projected = true;
                                trapezoid_from_angles(area, half, curve.alpha0, curve.alpha0)
                            } else {
                                Err(Error::NoSolution(msg))
                            }
                        }
                        other => other,
                    }
                }
                _ => {
                    let (c, _) = fit_amplitude(&w, &ks, RIGHT_ANGLE_EXPONENT, 0.5).stage("amplitude")?;
                    // |W| ~ sqrt(2 pi b) C_beta k^{-1/2}
                    let amp = c / (2.0 * PI * half).sqrt();
                    invariants.top = Some(Sourced::new(half, Source::WaveFit));
                    invariants.amplitude =
                        Some(Sourced::new(AmplitudeConstant::CBetaRightAngle(amp), Source::WaveFit));
                    reconstruct_from_aqbc(area, q, half, AmplitudeConstant::CBetaRightAngle(amp))
                }
            }
        }
    }
    .stage("reconstruct")?;

    let residuals = Residuals {
        heat_fit: heat.residual,
        perimeter: result.perimeter() - perimeter,
        area: result.area() - area,
    };
    let diagnostics = Diagnostics {
        heat,
        heat_grid,
        invariants,
        peaks,
        plan,
        amplitude_grid,
        fold_projected,
        recovered: Recovered::from(&result),
        residuals,
        advisory_orbit_lengths: named_orbits(&result).iter().map(|o| o.length).collect(),
    };
    Ok((result, diagnostics))
}
