use super::{compute_spectrum, BoundaryCondition, EigenOptions, EigenRequest, Method, SpectrumData};
use crate::geometry::TrapezoidSpec;
use crate::traces::SpectralMeasure;
use crate::{Error, Result};

const TRUST_REL_DIFF: f64 = 0.05;
/// Refinement may raise an eigenvalue by at most this relative amount.
const MONOTONE_SLACK: f64 = 1e-6;

fn check_pair(coarse: &SpectrumData, fine: &SpectrumData) -> Result<()> {
    if coarse.bc() != fine.bc() {
        return Err(Error::Mismatch(format!("boundary conditions differ: {} vs {}", coarse.bc(), fine.bc())));
    }
    let (hc, hf) = (coarse.mesh_size(), fine.mesh_size());
    if hc > 0.0 && hf > 0.0 && !(1.9..=2.1).contains(&(hc / hf)) {
        return Err(Error::Mismatch(format!("mesh size ratio {} is not 2", hc / hf)));
    }
    Ok(())
}

/// Largest prefix where coarse and fine agree to 5%.
fn trusted_prefix(coarse: &[f64], fine: &[f64]) -> usize {
    coarse
        .iter()
        .zip(fine)
        .position(|(c, f)| (f - c).abs() > TRUST_REL_DIFF * f.abs().max(f64::MIN_POSITIVE))
        .unwrap_or(coarse.len().min(fine.len()))
}

/// Index-by-index `lambda* = lambda_{h/2} + (lambda_{h/2} - lambda_h)/3`.
pub fn richardson_extrapolate(coarse: &SpectrumData, fine: &SpectrumData) -> Result<SpectrumData> {
    check_pair(coarse, fine)?;
    if coarse.count() != fine.count() {
        return Err(Error::Mismatch(format!("counts differ: {} vs {}", coarse.count(), fine.count())));
    }
    let (c, f) = (coarse.eigenvalues(), fine.eigenvalues());
    let trusted = trusted_prefix(c, f);
    let scale = c.last().copied().unwrap_or(1.0).abs().max(1.0);
    if let Some(i) = (0..trusted).find(|&i| f[i] > c[i] + MONOTONE_SLACK * c[i].abs() + 1e-12 * scale) {
        return Err(Error::Mismatch(format!(
            "index {i} rises under refinement ({} -> {}); eigenvalues crossed or lists are unrelated",
            c[i], f[i]
        )));
    }
    let mut values: Vec<f64> = c.iter().zip(f).map(|(c, f)| f + (f - c) / 3.0).collect();
    if fine.bc() == BoundaryCondition::Neumann {
        if let Some(v) = values.first_mut() {
            *v = v.max(0.0);
        }
    }
    values.sort_by(f64::total_cmp);
    let trust = if trusted == 0 { 0.0 } else { values[trusted - 1] };
    let complete = fine.lambda_complete().min(values.last().copied().unwrap_or(0.0));
    SpectrumData::new(fine.bc(), values, trust, complete, fine.mesh_size(), Method::Extrapolated)
}

/// Spectra on meshes `n` and `2n`.
///
/// As a [`SpectralMeasure`] the pair is `4/3 mu_fine - 1/3 mu_coarse`, which
/// cancels the `h^2` error of any linear spectral functional without pairing
/// individual eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct RichardsonPair {
    coarse: SpectrumData,
    fine: SpectrumData,
    lambda_max_trust: f64,
}

impl RichardsonPair {
    pub fn new(coarse: SpectrumData, fine: SpectrumData) -> Result<Self> {
        check_pair(&coarse, &fine)?;
        let n = coarse.count().min(fine.count());
        let trusted = trusted_prefix(&coarse.eigenvalues()[..n], &fine.eigenvalues()[..n]);
        let lambda_max_trust = if trusted == 0 { 0.0 } else { fine.eigenvalues()[trusted - 1] };
        Ok(Self { coarse, fine, lambda_max_trust })
    }

    /// Solves `request` on the `2n` mesh and the same count on the `n` mesh.
    pub fn compute(
        t: &TrapezoidSpec,
        n: usize,
        bc: BoundaryCondition,
        request: EigenRequest,
        opts: &EigenOptions,
    ) -> Result<Self> {
        let fine = compute_spectrum(t, 2 * n, bc, request, opts)?;
        let coarse = compute_spectrum(t, n, bc, EigenRequest::Count(fine.count().max(1)), opts)?;
        Self::new(coarse, fine)
    }

    pub fn coarse(&self) -> &SpectrumData {
        &self.coarse
    }

    pub fn fine(&self) -> &SpectrumData {
        &self.fine
    }

    pub fn extrapolated(&self) -> Result<SpectrumData> {
        richardson_extrapolate(&self.coarse, &self.fine)
    }
}

impl SpectralMeasure for RichardsonPair {
    fn bc(&self) -> BoundaryCondition {
        self.fine.bc()
    }

    fn atoms(&self) -> Box<dyn Iterator<Item = (f64, f64)> + '_> {
        let fine = self.fine.eigenvalues().iter().map(|&v| (v, 4.0 / 3.0));
        let coarse = self.coarse.eigenvalues().iter().map(|&v| (v, -1.0 / 3.0));
        Box::new(fine.chain(coarse))
    }

    fn lambda_max_trust(&self) -> f64 {
        self.lambda_max_trust
    }

    fn lambda_complete(&self) -> f64 {
        self.fine.lambda_complete().min(self.coarse.lambda_complete())
    }
}
