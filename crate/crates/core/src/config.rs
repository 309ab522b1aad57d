//! Tolerances and run configuration.
//!
//! Closed-form paths use the `const` thresholds below directly; numeric
//! pipelines take a [`Tolerances`] value so every threshold can be tuned in
//! one place.

use serde::{Deserialize, Serialize};

/// `|alpha - pi/2|` below this counts as a right angle in closed-form paths.
pub const RIGHT_ANGLE_TOL: f64 = 1e-9;

/// `|sin(.)|` below this marks a pole of the Keller coefficient.
pub const KELLER_POLE_TOL: f64 = 1e-12;

/// Interior angle within this of `pi/N` is non-diffractive.
pub const NON_DIFFRACTIVE_TOL: f64 = 1e-9;

/// Slack allowed on `beta <= alpha` before a parameter set is rejected.
pub const ANGLE_ORDER_SLACK: f64 = 1e-12;

/// Numeric thresholds shared by the FEM, trace and inverse pipelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Right-angle decision threshold for numerically recovered angles.
    pub right_angle: f64,
    /// Relative eigenpair residual accepted by the eigensolver.
    pub eig_residual: f64,
    /// Relative accuracy used to set `lambda_max_trust` after extrapolation.
    pub trust_relative_change: f64,
    /// Heat trace truncation estimate must stay below this fraction of the value.
    pub heat_tail: f64,
    /// Largest admissible condition number of the heat-fit design matrix.
    pub heat_condition: f64,
    /// Gaussian tail (relative to its peak) tolerated at the edge of the
    /// computed spectrum by the wave transform.
    pub wave_tail: f64,
    /// Peak detection threshold as a multiple of the median scan level.
    pub peak_median_factor: f64,
    /// Peaks below this fraction of the scan maximum are ignored.
    pub peak_relative_floor: f64,
    /// Log-log r^2 that admits a local maximum below the median threshold.
    pub peak_clean_r2: f64,
    /// Minimum r^2 of the log-log fit before an order estimate is reported.
    pub order_r2_floor: f64,
    /// Half-width of the order windows used by the case decision.
    pub order_window: f64,
    /// `|q - 8/pi^2|` below this selects the rectangle reconstruction.
    pub rectangle_q: f64,
    /// Relative slack for an amplitude constant just below the attainable
    /// range on a level curve (it is projected onto the isosceles end point).
    pub fold_slack: f64,
    /// Billiard corner-hit distance, relative to the trapezoid diameter.
    pub corner: f64,
    /// Pairing tolerance for exact spectra in the spectral union check.
    pub union_exact: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            right_angle: 1e-6,
            eig_residual: 1e-8,
            trust_relative_change: 0.05,
            heat_tail: 1e-6,
            heat_condition: 1e10,
            wave_tail: 1e-6,
            peak_median_factor: 5.0,
            peak_relative_floor: 1e-3,
            peak_clean_r2: 0.99,
            order_r2_floor: 0.8,
            order_window: 0.25,
            rectangle_q: 0.02,
            fold_slack: 0.1,
            corner: 1e-9,
            union_exact: 1e-9,
        }
    }
}

/// Configuration of a CLI run. A fixed seed with a fixed configuration gives
/// byte-identical output files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub mesh_n: usize,
    pub eig_count: Option<usize>,
    pub lambda_max: f64,
    /// Upper end of the range in which eigenvalues are trusted for traces.
    pub lambda_trust: Option<f64>,
    pub window_width: f64,
    pub t0: Option<f64>,
    pub k_min: f64,
    pub k_max: f64,
    pub k_step: f64,
    pub t_scan: (f64, f64),
    pub seed: u64,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mesh_n: 64,
            eig_count: None,
            lambda_max: 1600.0,
            lambda_trust: None,
            window_width: 0.15,
            t0: None,
            k_min: 10.0,
            k_max: 30.0,
            k_step: 0.5,
            t_scan: (1.0, 6.0),
            seed: 7,
            tolerances: Tolerances::default(),
        }
    }
}

impl RunConfig {
    pub fn k_grid(&self) -> Vec<f64> {
        k_grid(self.k_min, self.k_max, self.k_step)
    }

    pub fn validate(&self) -> crate::Result<()> {
        let positive = [
            ("mesh_n", self.mesh_n as f64),
            ("lambda_max", self.lambda_max),
            ("window_width", self.window_width),
            ("k_min", self.k_min),
            ("k_max", self.k_max),
            ("k_step", self.k_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(crate::Error::Precondition(format!("{name} must be positive, got {v}")));
            }
        }
        if self.k_max < self.k_min {
            return Err(crate::Error::Precondition("k_max < k_min".into()));
        }
        let trust = self.lambda_trust.unwrap_or(self.lambda_max);
        if self.k_max * self.k_max > trust {
            return Err(crate::Error::Range(format!(
                "k_max^2 = {} exceeds the trusted eigenvalue range {trust}",
                self.k_max * self.k_max
            )));
        }
        Ok(())
    }
}

/// Inclusive uniform grid `lo, lo + step, ...` up to `hi`.
pub fn k_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

/// Uniform grid ending exactly at `hi` and starting at or below `hi/2`.
pub fn octave_k_grid(hi: f64, step: f64) -> Vec<f64> {
    let n = (0.5 * hi / step - 1e-9).ceil() as usize;
    (0..=n).rev().map(|i| hi - i as f64 * step).collect()
}
