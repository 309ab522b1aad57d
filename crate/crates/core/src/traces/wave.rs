use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SpectralMeasure;
use crate::{Error, Result};

/// Gaussian tail at the top of the computed spectrum tolerated by default.
pub const DEFAULT_WAVE_TAIL: f64 = 1e-6;

/// `g(s) = sqrt(2 pi) w exp(-w^2 s^2 / 2)`, the Fourier transform of the
/// window `exp(-(t - t0)^2 / (2 w^2))` up to the phase `e^{i t0 s}`.
pub fn window_transform(width: f64, s: f64) -> f64 {
    (2.0 * PI).sqrt() * width * (-0.5 * (width * s).powi(2)).exp()
}

/// Largest `k` whose window keeps a relative tail below `tail` beyond
/// `sqrt(lambda_complete)`.
pub fn max_complete_k(lambda_complete: f64, width: f64, tail: f64) -> f64 {
    lambda_complete.max(0.0).sqrt() - (-2.0 * tail.ln()).sqrt() / width
}

fn check_window(t0: f64, width: f64) -> Result<()> {
    if !(t0 > 0.0 && t0.is_finite()) {
        return Err(Error::Precondition(format!("t0 must be positive, got {t0}")));
    }
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::Precondition(format!("window width must be positive, got {width}")));
    }
    Ok(())
}

/// Checks `k^2 <= lambda_max_trust` and that eigenvalues missing above
/// `lambda_complete` cannot leak into the window.
pub fn check_k_range<S: SpectralMeasure + ?Sized>(s: &S, width: f64, k_grid: &[f64], tail: f64) -> Result<()> {
    if let Some(k) = k_grid.iter().find(|k| !(**k > 0.0 && k.is_finite())) {
        return Err(Error::Precondition(format!("k grid must be positive, got {k}")));
    }
    let k_max = k_grid.iter().copied().fold(0.0, f64::max);
    if k_max * k_max > s.lambda_max_trust() {
        return Err(Error::Range(format!(
            "k = {k_max} needs eigenvalues up to {} but the spectrum is trusted to {}",
            k_max * k_max,
            s.lambda_max_trust()
        )));
    }
    let limit = max_complete_k(s.lambda_complete(), width, tail);
    if k_max > limit {
        return Err(Error::Range(format!(
            "k = {k_max} is within the window reach of the spectrum cutoff {} (limit k = {limit})",
            s.lambda_complete()
        )));
    }
    Ok(())
}

fn transform_at(atoms: &[(f64, f64)], t0: f64, width: f64, k: f64) -> Complex64 {
    // atoms are ascending, so the summation order is fixed
    let reach = 40.0 / width;
    let lo = atoms.partition_point(|(s, _)| *s < k - reach);
    let hi = atoms.partition_point(|(s, _)| *s <= k + reach);
    atoms[lo..hi]
        .iter()
        .map(|&(s, w)| w * window_transform(width, s - k) * Complex64::cis(t0 * (s - k)))
        .sum()
}

/// `(sqrt(lambda), weight)` sorted by frequency.
fn frequencies<S: SpectralMeasure + ?Sized>(s: &S) -> Vec<(f64, f64)> {
    let mut atoms: Vec<(f64, f64)> = s.atoms().map(|(l, w)| (l.max(0.0).sqrt(), w)).collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    atoms
}

/// `W(k) = sum_j g(sqrt(lambda_j) - k) e^{i t0 (sqrt(lambda_j) - k)}`.
pub fn wave_transform<S: SpectralMeasure + ?Sized>(
    s: &S,
    t0: f64,
    width: f64,
    k_grid: &[f64],
    tail: f64,
) -> Result<Vec<Complex64>> {
    check_window(t0, width)?;
    check_k_range(s, width, k_grid, tail)?;
    let atoms = frequencies(s);
    Ok(k_grid.par_iter().map(|&k| transform_at(&atoms, t0, width, k)).collect())
}

/// `|W(k_probe)|` as a function of `t0` on a uniform grid.
pub fn wave_scan<S: SpectralMeasure + ?Sized>(
    s: &S,
    t_range: (f64, f64),
    width: f64,
    k_probe: f64,
    step: f64,
    tail: f64,
) -> Result<Vec<(f64, f64)>> {
    let (lo, hi) = t_range;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Precondition(format!("invalid t range [{lo}, {hi}]")));
    }
    if !(step > 0.0 && step <= width / 2.0) {
        return Err(Error::Precondition(format!("scan step {step} must lie in (0, width/2]")));
    }
    check_window(lo, width)?;
    check_k_range(s, width, &[k_probe], tail)?;
    let atoms = frequencies(s);
    let n = ((hi - lo) / step).ceil() as usize;
    Ok((0..=n)
        .into_par_iter()
        .map(|i| {
            let t = (lo + i as f64 * step).min(hi);
            (t, transform_at(&atoms, t, width, k_probe).norm())
        })
        .collect())
}

/// Power-law fit `|W(k)| = c k^a` on a log-log scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub a: f64,
    pub c: f64,
    pub r2: f64,
}

pub fn estimate_order(w: &[Complex64], k_grid: &[f64]) -> Result<OrderFit> {
    if w.len() != k_grid.len() {
        return Err(Error::Precondition(format!("{} values for {} k points", w.len(), k_grid.len())));
    }
    if k_grid.len() < 10 {
        return Err(Error::Precondition(format!("order fit needs at least 10 k points, got {}", k_grid.len())));
    }
    let (lo, hi) = k_grid.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &k| (a.min(k), b.max(k)));
    if !(lo > 0.0 && hi >= 2.0 * lo) {
        return Err(Error::Precondition(format!("k grid must span a factor 2, got [{lo}, {hi}]")));
    }
    let pts: Vec<(f64, f64)> = w
        .iter()
        .zip(k_grid)
        .filter(|(v, _)| v.norm() > f64::MIN_POSITIVE && v.norm().is_finite())
        .map(|(v, k)| (k.ln(), v.norm().ln()))
        .collect();
    if 2 * pts.len() < k_grid.len() || pts.len() < 2 {
        return Err(Error::DegenerateFit(format!("|W| vanishes on {} of {} k points", k_grid.len() - pts.len(), k_grid.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let a = sxy / sxx;
    let intercept = my - a * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - a * p.0).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(OrderFit { a, c: intercept.exp(), r2 })
}

/// Fit of `|W(k)| k^{-a} = c + d k^{-p}` for a known exponent `a`; returns
/// `(c, d)`. The `d` term absorbs the next order of the expansion, `p`
/// powers of `k` below the leading one.
pub fn fit_amplitude(w: &[Complex64], k_grid: &[f64], a: f64, p: f64) -> Result<(f64, f64)> {
    if w.len() != k_grid.len() || w.len() < 3 {
        return Err(Error::Precondition("amplitude fit needs matching grids of at least 3 points".into()));
    }
    let pts: Vec<(f64, f64)> = w.iter().zip(k_grid).map(|(v, k)| (k.powf(-p), v.norm() * k.powf(-a))).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFit("k grid has a single point".into()));
    }
    let d = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    Ok((my - d * mx, d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakOptions {
    /// Peaks must exceed this multiple of the median scan level.
    pub median_factor: f64,
    /// and this fraction of the scan maximum.
    pub relative_floor: f64,
    /// Order estimates with a lower log-log r^2 are withheld.
    pub r2_floor: f64,
    /// A local maximum below the median threshold is still a peak when its
    /// power-law fit reaches this r^2.
    pub clean_r2: f64,
    /// Scan step as a fraction of the window width.
    pub step_fraction: f64,
    pub tail: f64,
}

impl Default for PeakOptions {
    fn default() -> Self {
        Self {
            median_factor: 5.0,
            relative_floor: 1e-3,
            r2_floor: 0.8,
            clean_r2: 0.99,
            step_fraction: 0.25,
            tail: DEFAULT_WAVE_TAIL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavePeak {
    pub t0: f64,
    /// `(k_min, k_max, k_step)` of the order fit.
    pub k_grid: (f64, f64, f64),
    /// Exponent `a` of `|W(k)| ~ c k^a`.
    pub order_estimate: Option<f64>,
    pub amplitude_estimate: Option<f64>,
    pub window_width: f64,
    pub fit_r2: f64,
    /// `|W(k_probe)|` at `t0`.
    pub scan_value: f64,
    pub detection: Detection,
}

/// Why a local maximum was reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detection {
    /// Above the median threshold.
    Level,
    /// Below it, but with a clean power law in `k`.
    PowerLaw,
}

/// Golden-section maximization of `f` on `[a, b]`.
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Local maxima of `|W(k_probe)|` over `t0 in t_range`, refined to
/// `width/100` and annotated with a power-law fit over `k_grid`.
pub fn detect_peaks<S: SpectralMeasure + ?Sized>(
    s: &S,
    t_range: (f64, f64),
    width: f64,
    k_probe: f64,
    k_grid: &[f64],
    opts: &PeakOptions,
) -> Result<Vec<WavePeak>> {
    let step = width * opts.step_fraction.min(0.5);
    let scan = wave_scan(s, t_range, width, k_probe, step, opts.tail)?;
    check_k_range(s, width, k_grid, opts.tail)?;
    let mut levels: Vec<f64> = scan.iter().map(|p| p.1).collect();
    let top = levels.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return Ok(Vec::new());
    }
    levels.sort_by(f64::total_cmp);
    let median = levels[levels.len() / 2];
    let threshold = opts.median_factor * median;
    let floor = opts.relative_floor * top;
    let atoms = frequencies(s);
    let probe = |t: f64| transform_at(&atoms, t, width, k_probe).norm();
    let mut peaks = Vec::new();
    for i in 1..scan.len().saturating_sub(1) {
        let (t, v) = scan[i];
        if v <= floor || v < scan[i - 1].1 || v <= scan[i + 1].1 {
            continue;
        }
        let t_star = golden_max(probe, (t - step).max(t_range.0), (t + step).min(t_range.1), width / 100.0);
        let kg = (
            k_grid.iter().copied().fold(f64::INFINITY, f64::min),
            k_grid.iter().copied().fold(0.0, f64::max),
            if k_grid.len() > 1 { k_grid[1] - k_grid[0] } else { 0.0 },
        );
        let values: Vec<Complex64> = k_grid.par_iter().map(|&k| transform_at(&atoms, t_star, width, k)).collect();
        let (order, amp, r2) = match estimate_order(&values, k_grid) {
            Ok(fit) if fit.r2 >= opts.r2_floor => (Some(fit.a), Some(fit.c), fit.r2),
            Ok(fit) => (None, None, fit.r2),
            Err(Error::DegenerateFit(_)) => (None, None, 0.0),
            Err(e) => return Err(e),
        };
        let detection = if v > threshold {
            Detection::Level
        } else if r2 >= opts.clean_r2 {
            Detection::PowerLaw
        } else {
            continue;
        };
        peaks.push(WavePeak {
            t0: t_star,
            k_grid: kg,
            order_estimate: order,
            amplitude_estimate: amp,
            window_width: width,
            fit_r2: r2,
            scan_value: probe(t_star),
            detection,
        });
    }
    Ok(peaks)
}

/// `|W_N(k)| / |W_D(k)|` at one `t0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnComparison {
    pub t0: f64,
    pub width: f64,
    pub k: Vec<f64>,
    pub abs_neumann: Vec<f64>,
    pub abs_dirichlet: Vec<f64>,
    pub ratio: Vec<f64>,
    /// Least-squares slope of `log ratio` against `log k`.
    pub trend_slope: f64,
}

impl DnComparison {
    pub fn is_increasing(&self) -> bool {
        self.ratio.windows(2).all(|w| w[1] > w[0])
    }
}

pub fn compare_dn_at<N, D>(s_n: &N, s_d: &D, t0: f64, width: f64, k_grid: &[f64], tail: f64) -> Result<DnComparison>
where
    N: SpectralMeasure + ?Sized,
    D: SpectralMeasure + ?Sized,
{
    let wn = wave_transform(s_n, t0, width, k_grid, tail)?;
    let wd = wave_transform(s_d, t0, width, k_grid, tail)?;
    let abs_neumann: Vec<f64> = wn.iter().map(|v| v.norm()).collect();
    let abs_dirichlet: Vec<f64> = wd.iter().map(|v| v.norm()).collect();
    let ratio: Vec<f64> = abs_neumann.iter().zip(&abs_dirichlet).map(|(n, d)| n / d).collect();
    let pts: Vec<(f64, f64)> =
        k_grid.iter().zip(&ratio).filter(|(_, r)| r.is_finite() && **r > 0.0).map(|(k, r)| (k.ln(), r.ln())).collect();
    let trend_slope = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx
    } else {
        f64::NAN
    };
    Ok(DnComparison { t0, width, k: k_grid.to_vec(), abs_neumann, abs_dirichlet, ratio, trend_slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::k_grid;
    use crate::fem::{rectangle_exact_spectrum, BoundaryCondition, Method, SpectrumData};
    use approx::assert_relative_eq;

    fn open_ended(values: Vec<f64>) -> SpectrumData {
        SpectrumData::new(BoundaryCondition::Neumann, values, f64::INFINITY, f64::INFINITY, 0.0, Method::Fem).unwrap()
    }

    #[test]
    fn trivial_cases() {
        let empty = open_ended(vec![]);
        let w = wave_transform(&empty, 1.0, 0.2, &[5.0, 6.0], 1e-6).unwrap();
        assert!(w.iter().all(|v| v.norm() == 0.0));
        let k0 = 7.5;
        let one = open_ended(vec![k0 * k0]);
        let w = wave_transform(&one, 2.0, 0.3, &[k0], 1e-6).unwrap();
        assert_relative_eq!(w[0].re, (2.0 * PI).sqrt() * 0.3, epsilon = 1e-14);
        assert_relative_eq!(w[0].im, 0.0, epsilon = 1e-14);
        assert!(detect_peaks(&empty, (1.0, 2.0), 0.2, 5.0, &k_grid(5.0, 12.0, 0.5), &PeakOptions::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn linearity_and_tail_bound() {
        let a = open_ended(vec![3.0, 50.0, 120.0]);
        let b = open_ended(vec![10.0, 80.0]);
        let ab = open_ended(vec![3.0, 10.0, 50.0, 80.0, 120.0]);
        let ks = [4.0, 6.5, 9.0];
        let (wa, wb, wab) = (
            wave_transform(&a, 1.3, 0.4, &ks, 1e-6).unwrap(),
            wave_transform(&b, 1.3, 0.4, &ks, 1e-6).unwrap(),
            wave_transform(&ab, 1.3, 0.4, &ks, 1e-6).unwrap(),
        );
        for i in 0..3 {
            assert!((wa[i] + wb[i] - wab[i]).norm() < 1e-12);
        }
        let far = open_ended(vec![400.0, 900.0]);
        let w = wave_transform(&far, 1.0, 0.5, &[5.0], 1e-6).unwrap();
        assert!(w[0].norm() <= 2.0 * window_transform(0.5, 20.0 - 5.0));
    }

    #[test]
    fn range_guards() {
        let s = rectangle_exact_spectrum(1.0, 2.0, BoundaryCondition::Neumann, 400.0).unwrap();
        assert!(matches!(wave_transform(&s, 2.0, 0.3, &[21.0], 1e-6), Err(Error::Range(_))));
        // within trust but too close to the cutoff for the window
        assert!(matches!(wave_transform(&s, 2.0, 0.3, &[19.0], 1e-6), Err(Error::Range(_))));
        assert!(wave_transform(&s, 2.0, 0.3, &[2.0], 1e-6).is_ok());
        assert!(matches!(wave_transform(&s, -1.0, 0.3, &[2.0], 1e-6), Err(Error::Precondition(_))));
    }

    #[test]
    fn order_fits() {
        let ks = k_grid(10.0, 40.0, 1.0);
        let w: Vec<Complex64> = ks.iter().map(|k| Complex64::new(3.0 * k.sqrt(), 0.0)).collect();
        let f = estimate_order(&w, &ks).unwrap();
        assert_relative_eq!(f.a, 0.5, epsilon = 1e-12);
        assert_relative_eq!(f.c, 3.0, epsilon = 1e-12);
        let w: Vec<Complex64> = ks.iter().map(|k| Complex64::new((1.0 + 0.01 * k.sin()) / k, 0.0)).collect();
        assert!((estimate_order(&w, &ks).unwrap().a + 1.0).abs() < 0.02);
        let zero = vec![Complex64::new(0.0, 0.0); ks.len()];
        assert!(matches!(estimate_order(&zero, &ks), Err(Error::DegenerateFit(_))));
        let w: Vec<Complex64> = ks.iter().map(|k| Complex64::new(2.0 / k * (1.0 - 3.0 / k), 0.0)).collect();
        let (c, d) = fit_amplitude(&w, &ks, -1.0, 1.0).unwrap();
        assert_relative_eq!(c, 2.0, epsilon = 1e-12);
        assert_relative_eq!(d, -6.0, epsilon = 1e-10);
    }

    #[test]
    fn identical_spectra_ratio_one() {
        let s = rectangle_exact_spectrum(1.0, 2.0, BoundaryCondition::Neumann, 2500.0).unwrap();
        let ks = k_grid(10.0, 20.0, 1.0);
        let r = compare_dn_at(&s, &s, 2.0, 0.3, &ks, 1e-6).unwrap();
        assert!(r.ratio.iter().all(|x| (x - 1.0).abs() < 1e-15));
        assert!(r.trend_slope.abs() < 1e-12);
    }
}
