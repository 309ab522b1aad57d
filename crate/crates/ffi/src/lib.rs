//! C ABI for `trapezoid-spectra`.
//!
//! Objects cross the boundary as opaque handles (`TsTrapezoid`,
//! `TsSpectrum`) created by `*_new`/`*_compute` functions and released with
//! the matching `*_free`. Every fallible call returns a [`TsStatus`]; on
//! failure [`ts_last_error`] describes the error for the calling thread.
//! Output parameters are written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use trapezoid_spectra::fem::{
    compute_spectrum, rectangle_exact_spectrum, EigenOptions, EigenRequest, Method, RichardsonPair,
};
use trapezoid_spectra::geometry::{forward_invariants, AmplitudeConstant, TrapezoidSpec};
use trapezoid_spectra::inverse::{end_to_end_reconstruct, reconstruct_from_alhb, ReconstructOptions};
use trapezoid_spectra::traces::{fit_heat_invariants, geometric_grid, heat_trace, DEFAULT_HEAT_CONDITION};
use trapezoid_spectra::{BoundaryCondition, Error, SpectrumData};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsStatus {
    Ok = 0,
    NullPointer = 1,
    /// Invalid parameters or a violated precondition.
    InvalidArgument = 2,
    /// Eigenvalue computation failed.
    Eigen = 3,
    /// Heat or wave trace analysis failed.
    Trace = 4,
    /// Reconstruction failed.
    Reconstruct = 5,
    /// Caller buffer too small; the required length was written.
    BufferTooSmall = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsBoundary {
    Dirichlet = 0,
    Neumann = 1,
}

impl From<TsBoundary> for BoundaryCondition {
    fn from(b: TsBoundary) -> Self {
        match b {
            TsBoundary::Dirichlet => BoundaryCondition::Dirichlet,
            TsBoundary::Neumann => BoundaryCondition::Neumann,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum TsAmplitudeKind {
    /// Rectangle: no top-edge amplitude.
    #[default]
    None = 0,
    /// `C_{alpha,beta}`.
    AlphaBeta = 1,
    /// `C_beta` with a right angle at `alpha`.
    BetaRightAngle = 2,
}

/// Closed-form invariants.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TsInvariants {
    pub area: f64,
    pub perimeter: f64,
    pub q: f64,
    pub height: f64,
    pub top: f64,
    pub amplitude: f64,
    pub amplitude_kind: TsAmplitudeKind,
}

/// Heat-trace fit result.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TsHeatFit {
    pub area: f64,
    pub perimeter: f64,
    pub corner_sum: f64,
    pub residual: f64,
}

/// Trapezoid parameters; `base` is the bottom length.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TsParams {
    pub b: f64,
    pub h: f64,
    pub alpha: f64,
    pub beta: f64,
    pub base: f64,
}

impl From<&TrapezoidSpec> for TsParams {
    fn from(t: &TrapezoidSpec) -> Self {
        Self { b: t.b(), h: t.h(), alpha: t.alpha(), beta: t.beta(), base: t.base() }
    }
}

/// Opaque trapezoid.
pub struct TsTrapezoid(TrapezoidSpec);

/// Opaque eigenvalue list.
pub struct TsSpectrum(SpectrumData);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: TsStatus, e: &Error) -> TsStatus {
    set_error(e.to_string());
    status
}

/// Status for an error raised while computing in `stage`.
fn classify(stage: TsStatus, e: &Error) -> TsStatus {
    match e.root() {
        Error::Precondition(_) | Error::Domain(_) | Error::Json(_) => fail(TsStatus::InvalidArgument, e),
        _ => fail(stage, e),
    }
}

fn guard(f: impl FnOnce() -> TsStatus) -> TsStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| {
        set_error("panic inside trapezoid-spectra".into());
        TsStatus::Panic
    })
}

fn null(name: &str) -> TsStatus {
    set_error(format!("{name} is null"));
    TsStatus::NullPointer
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ts_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ts_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Validates `(b, h, alpha, beta)` (radians, `beta <= alpha`).
///
/// # Safety
/// `out` must be null or valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn ts_trapezoid_new(
    b: f64,
    h: f64,
    alpha: f64,
    beta: f64,
    out: *mut *mut TsTrapezoid,
) -> TsStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        match TrapezoidSpec::new(b, h, alpha, beta) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(TsTrapezoid(t)));
                TsStatus::Ok
            }
            Err(e) => fail(TsStatus::InvalidArgument, &e),
        }
    })
}

/// # Safety
/// `t` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ts_trapezoid_free(t: *mut TsTrapezoid) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// # Safety
/// `t` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ts_trapezoid_params(t: *const TsTrapezoid, out: *mut TsParams) -> TsStatus {
    guard(|| {
        let (Some(t), false) = (t.as_ref(), out.is_null()) else {
            return null("argument");
        };
        *out = TsParams::from(&t.0);
        TsStatus::Ok
    })
}

/// # Safety
/// `t` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ts_trapezoid_invariants(t: *const TsTrapezoid, out: *mut TsInvariants) -> TsStatus {
    guard(|| {
        let (Some(t), false) = (t.as_ref(), out.is_null()) else {
            return null("argument");
        };
        let inv = forward_invariants(&t.0);
        let (amplitude, kind) = match inv.amplitude.map(|a| a.value) {
            None => (0.0, TsAmplitudeKind::None),
            Some(AmplitudeConstant::CAlphaBeta(c)) => (c, TsAmplitudeKind::AlphaBeta),
            Some(AmplitudeConstant::CBetaRightAngle(c)) => (c, TsAmplitudeKind::BetaRightAngle),
        };
        *out = TsInvariants {
            area: inv.area.value,
            perimeter: inv.perimeter.value,
            q: inv.q.value,
            height: t.0.h(),
            top: t.0.b(),
            amplitude,
            amplitude_kind: kind,
        };
        TsStatus::Ok
    })
}

/// FEM eigenvalues on an `n x n` mesh: the `count` smallest when `count > 0`,
/// else all below `lambda_max`. With `richardson != 0` the list is
/// extrapolated from meshes `n` and `2n`.
///
/// # Safety
/// `t` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ts_spectrum_compute(
    t: *const TsTrapezoid,
    n: usize,
    bc: TsBoundary,
    count: usize,
    lambda_max: f64,
    richardson: i32,
    out: *mut *mut TsSpectrum,
) -> TsStatus {
    guard(|| {
        let (Some(t), false) = (t.as_ref(), out.is_null()) else {
            return null("argument");
        };
        let request = if count > 0 { EigenRequest::Count(count) } else { EigenRequest::Threshold(lambda_max) };
        let opts = EigenOptions::default();
        let result = if richardson != 0 {
            RichardsonPair::compute(&t.0, n, bc.into(), request, &opts).and_then(|p| p.extrapolated())
        } else {
            compute_spectrum(&t.0, n, bc.into(), request, &opts)
        };
        match result {
            Ok(s) => {
                *out = Box::into_raw(Box::new(TsSpectrum(s)));
                TsStatus::Ok
            }
            Err(e) => classify(TsStatus::Eigen, &e),
        }
    })
}

/// Exact spectrum of the `width x height` rectangle below `lambda_max`.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ts_spectrum_rectangle(
    width: f64,
    height: f64,
    bc: TsBoundary,
    lambda_max: f64,
    out: *mut *mut TsSpectrum,
) -> TsStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        match rectangle_exact_spectrum(width, height, bc.into(), lambda_max) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(TsSpectrum(s)));
                TsStatus::Ok
            }
            Err(e) => classify(TsStatus::Eigen, &e),
        }
    })
}

/// Wraps `len` ascending eigenvalues; the list counts as trusted and
/// complete up to its last value.
///
/// # Safety
/// `values` must be valid for `len` reads; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ts_spectrum_from_values(
    bc: TsBoundary,
    values: *const f64,
    len: usize,
    out: *mut *mut TsSpectrum,
) -> TsStatus {
    guard(|| {
        if out.is_null() || (values.is_null() && len > 0) {
            return null("argument");
        }
        let v = if len == 0 { Vec::new() } else { std::slice::from_raw_parts(values, len).to_vec() };
        match SpectrumData::from_values(bc.into(), v, Method::Fem) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(TsSpectrum(s)));
                TsStatus::Ok
            }
            Err(e) => fail(TsStatus::InvalidArgument, &e),
        }
    })
}

/// # Safety
/// `s` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ts_spectrum_free(s: *mut TsSpectrum) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of eigenvalues, 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ts_spectrum_len(s: *const TsSpectrum) -> usize {
    s.as_ref().map_or(0, |s| s.0.count())
}

/// Largest trusted eigenvalue, NaN for a null handle.
///
/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ts_spectrum_lambda_max_trust(s: *const TsSpectrum) -> f64 {
    s.as_ref().map_or(f64::NAN, |s| s.0.lambda_max_trust())
}

/// Copies the eigenvalues into `buf`. `*written` receives the list length;
/// when `cap` is smaller nothing is copied and `BufferTooSmall` is returned.
///
/// # Safety
/// `buf` must be valid for `cap` writes; `written` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ts_spectrum_copy(
    s: *const TsSpectrum,
    buf: *mut f64,
    cap: usize,
    written: *mut usize,
) -> TsStatus {
    guard(|| {
        let (Some(s), false) = (s.as_ref(), written.is_null()) else {
            return null("argument");
        };
        let v = s.0.eigenvalues();
        *written = v.len();
        if v.len() > cap {
            set_error(format!("buffer holds {cap} values, {} needed", v.len()));
            return TsStatus::BufferTooSmall;
        }
        if !v.is_empty() {
            if buf.is_null() {
                return null("buf");
            }
            ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len());
        }
        TsStatus::Ok
    })
}

/// Fits `A/(4 pi t) +- L/(8 sqrt(pi t)) + c` to the heat trace on
/// `points` geometric times in `[t_min, t_max]`.
///
/// # Safety
/// `s` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ts_heat_fit(
    s: *const TsSpectrum,
    t_min: f64,
    t_max: f64,
    points: usize,
    out: *mut TsHeatFit,
) -> TsStatus {
    guard(|| {
        let (Some(s), false) = (s.as_ref(), out.is_null()) else {
            return null("argument");
        };
        if !(t_min > 0.0 && t_max > t_min) || points < 2 {
            set_error(format!("invalid heat grid [{t_min}, {t_max}] with {points} points"));
            return TsStatus::InvalidArgument;
        }
        let ts = geometric_grid(t_min, t_max, points);
        let fit = heat_trace(&s.0, &ts, 1e-6)
            .and_then(|v| fit_heat_invariants(&v, &ts, s.0.bc(), DEFAULT_HEAT_CONDITION));
        match fit {
            Ok(f) => {
                *out = TsHeatFit {
                    area: f.recovered.area,
                    perimeter: f.recovered.perimeter,
                    corner_sum: f.recovered.corner_sum,
                    residual: f.residual,
                };
                TsStatus::Ok
            }
            Err(e) => classify(TsStatus::Trace, &e),
        }
    })
}

/// Recovers the trapezoid from a Neumann spectrum with default options.
///
/// # Safety
/// `s` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ts_reconstruct(s: *const TsSpectrum, out: *mut TsParams) -> TsStatus {
    guard(|| {
        let (Some(s), false) = (s.as_ref(), out.is_null()) else {
            return null("argument");
        };
        match end_to_end_reconstruct(&s.0, &ReconstructOptions::default()) {
            Ok((t, _)) => {
                *out = TsParams::from(&t);
                TsStatus::Ok
            }
            Err(e) => fail(TsStatus::Reconstruct, &e),
        }
    })
}

/// Trapezoid from area, perimeter, height and top length.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ts_reconstruct_alhb(a: f64, l: f64, h: f64, b: f64, out: *mut TsParams) -> TsStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        match reconstruct_from_alhb(a, l, h, b) {
            Ok(t) => {
                *out = TsParams::from(&t);
                TsStatus::Ok
            }
            Err(e) => classify(TsStatus::Reconstruct, &e),
        }
    })
}
