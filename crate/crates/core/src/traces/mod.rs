//! Heat and wave traces of eigenvalue lists.
//!
//! Every operation takes a [`SpectralMeasure`]: a plain [`SpectrumData`] or a
//! signed combination such as a Richardson pair. Heat and wave traces are
//! linear in the measure.

mod heat;
mod wave;

pub use heat::{
    fit_heat_invariants, geometric_grid, heat_trace, min_heat_time, HeatFit, RecoveredInvariants,
    DEFAULT_HEAT_CONDITION, DEFAULT_HEAT_TAIL,
};
pub use wave::{
    check_k_range, compare_dn_at, detect_peaks, estimate_order, fit_amplitude, max_complete_k, wave_scan,
    wave_transform, window_transform, Detection, DnComparison, OrderFit, PeakOptions, WavePeak, DEFAULT_WAVE_TAIL,
};

use crate::fem::{BoundaryCondition, Method, SpectrumData};

/// A finite signed combination of point masses on the eigenvalue axis.
pub trait SpectralMeasure {
    fn bc(&self) -> BoundaryCondition;
    /// `(lambda, weight)` pairs.
    fn atoms(&self) -> Box<dyn Iterator<Item = (f64, f64)> + '_>;
    /// Largest eigenvalue meeting the accuracy target.
    fn lambda_max_trust(&self) -> f64;
    /// No eigenvalue below this bound is missing.
    fn lambda_complete(&self) -> f64;
}

impl SpectralMeasure for SpectrumData {
    fn bc(&self) -> BoundaryCondition {
        SpectrumData::bc(self)
    }

    fn atoms(&self) -> Box<dyn Iterator<Item = (f64, f64)> + '_> {
        Box::new(self.eigenvalues().iter().map(|&v| (v, 1.0)))
    }

    fn lambda_max_trust(&self) -> f64 {
        SpectrumData::lambda_max_trust(self)
    }

    fn lambda_complete(&self) -> f64 {
        SpectrumData::lambda_complete(self)
    }
}

/// Relative eigenvalue accuracy assumed for non-exact spectra.
const FEM_ACCURACY: f64 = 0.005;

/// Multiset equality of `S_D u S_N` and `S_double` below `lambda_max`.
///
/// Pairing tolerance is `exact_tol` relative when all three lists are exact,
/// and three times the FEM accuracy target otherwise.
pub fn spectral_union_check(
    s_d: &SpectrumData,
    s_n: &SpectrumData,
    s_double: &SpectrumData,
    lambda_max: f64,
    exact_tol: f64,
) -> bool {
    let exact = [s_d, s_n, s_double].iter().all(|s| s.method() == Method::ExactRectangle);
    let rel = if exact { exact_tol } else { 3.0 * FEM_ACCURACY };
    let mut union: Vec<f64> = s_d.below(lambda_max).iter().chain(s_n.below(lambda_max)).copied().collect();
    union.sort_by(f64::total_cmp);
    let double = s_double.below(lambda_max);
    union.len() == double.len() && union.iter().zip(double).all(|(a, b)| (a - b).abs() <= rel * a.abs().max(1.0))
}
