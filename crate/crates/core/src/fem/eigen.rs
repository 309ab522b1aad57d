//! Smallest eigenvalues of a sparse symmetric pencil `K u = lambda M u`
//! with `K` positive semidefinite and `M` positive definite.
//!
//! The interval `[lo, lambda_max)` is cut into slices. The exact number of
//! eigenvalues in each slice comes from the inertia of `K - s M` at the two
//! ends; shift-invert Lanczos at the slice midpoint then runs until that many
//! converged Ritz values lie inside the slice. Converged pairs are locked and
//! the iteration restarts from a fresh random vector, which recovers repeated
//! eigenvalues that a single Krylov space cannot see.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sparse::{CsrMatrix, Ldl, LdlSymbolic};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenRequest {
    /// The `k` smallest eigenvalues.
    Count(usize),
    /// Every eigenvalue below the threshold.
    Threshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EigenOptions {
    /// Bound on the normwise backward error
    /// `|K u - lambda M u| / ((|K| + |lambda| |M|) |u|)` of every pair.
    pub residual_tol: f64,
    /// Target number of eigenvalues per slice.
    pub slice_size: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { residual_tol: 1e-8, slice_size: 32, max_restarts: 12, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution {
    pub values: Vec<f64>,
    /// Every eigenvalue below this bound is in `values`.
    pub lambda_complete: f64,
    pub max_residual: f64,
}

struct Pencil {
    k: CsrMatrix,
    m: CsrMatrix,
    sym: LdlSymbolic,
    k_norm: f64,
    m_norm: f64,
    scratch: Vec<f64>,
}

const PIVOT_TOL: f64 = 1e-13;

impl Pencil {
    fn factor(&self, sigma: f64) -> Result<Ldl> {
        let values: Vec<f64> = self.k.values().iter().zip(self.m.values()).map(|(k, m)| k - sigma * m).collect();
        Ldl::factor(&self.sym, &self.k, &values, PIVOT_TOL)
    }

    /// Factor at `sigma`, nudged away from an eigenvalue if a pivot vanishes.
    fn factor_near(&self, sigma: f64, scale: f64) -> Result<(f64, Ldl)> {
        let mut s = sigma;
        for attempt in 0..8 {
            match self.factor(s) {
                Ok(f) => return Ok((s, f)),
                Err(Error::SingularPivot { .. }) => {
                    let step = scale * 1e-7 * (1u64 << attempt) as f64;
                    s = sigma + if attempt % 2 == 0 { step } else { -step };
                }
                Err(e) => return Err(e),
            }
        }
        self.factor(s).map(|f| (s, f))
    }

    fn backward_error(&mut self, lambda: f64, x: &[f64], mx: &[f64]) -> f64 {
        self.k.matvec_into(x, &mut self.scratch);
        let r: f64 = self.scratch.iter().zip(mx).map(|(kx, mx)| (kx - lambda * mx).powi(2)).sum::<f64>().sqrt();
        let xn = dot(x, x).sqrt();
        r / ((self.k_norm + lambda.abs() * self.m_norm) * xn)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Smallest eigenvalues of `K u = lambda M u`.
///
/// `perm` is a fill-reducing order for the factorization; the eigenvalues do
/// not depend on it. `K` and `M` must share one sparsity pattern.
pub fn generalized_eigs(
    k: &CsrMatrix,
    m: &CsrMatrix,
    perm: Option<&[usize]>,
    request: EigenRequest,
    opts: &EigenOptions,
) -> Result<EigenSolution> {
    let n = k.n();
    if !k.same_pattern(m) {
        return Err(Error::Precondition("stiffness and mass must share a sparsity pattern".into()));
    }
    match request {
        EigenRequest::Count(c) if c == 0 || c > n => {
            return Err(Error::Precondition(format!("requested {c} eigenvalues of a {n}-dimensional problem")));
        }
        EigenRequest::Threshold(t) if !(t > 0.0 && t.is_finite()) => {
            return Err(Error::Precondition(format!("threshold must be positive, got {t}")));
        }
        _ => {}
    }
    let (k, m) = match perm {
        Some(p) => (k.permute(p), m.permute(p)),
        None => (k.clone(), m.clone()),
    };
    let sym = LdlSymbolic::new(&k);
    let mut pencil = Pencil { k_norm: k.norm_inf(), m_norm: m.norm_inf(), k, m, sym, scratch: vec![0.0; n] };

    // Typical eigenvalue spacing sets the slice widths.
    let tr_k: f64 = (0..n).map(|i| pencil.k.get(i, i)).sum();
    let tr_m: f64 = (0..n).map(|i| pencil.m.get(i, i)).sum();
    let spacing = (tr_k / tr_m / n as f64).max(f64::MIN_POSITIVE);
    let lo = -0.5 * spacing;
    let (lo, f_lo) = pencil.factor_near(lo, spacing)?;
    let mut below_a = f_lo.inertia();
    if below_a != 0 {
        return Err(Error::Precondition("stiffness matrix is not positive semidefinite".into()));
    }

    let target = opts.slice_size.max(4);
    let limit = match request {
        EigenRequest::Threshold(t) => t,
        EigenRequest::Count(_) => f64::INFINITY,
    };
    let mut values: Vec<f64> = Vec::new();
    let mut max_residual: f64 = 0.0;
    let mut a = lo;
    let mut width = spacing * target as f64;
    let mut slice_index = 0u64;
    loop {
        let done = match request {
            EigenRequest::Count(c) => below_a >= c,
            EigenRequest::Threshold(t) => a >= t,
        };
        if done || below_a >= n {
            break;
        }
        // Choose the slice end so it holds roughly `target` eigenvalues.
        let mut b;
        let mut below_b;
        let mut tries = 0;
        loop {
            b = (a + width).min(limit);
            let (bb, f) = pencil.factor_near(b, spacing)?;
            b = bb;
            below_b = f.inertia();
            let count = below_b - below_a;
            tries += 1;
            if count > 2 * target && tries < 20 {
                width *= 0.5;
                continue;
            }
            if count < target / 2 && b < limit && below_b < n && tries < 20 {
                width *= 2.0;
                continue;
            }
            break;
        }
        let expected = below_b - below_a;
        if expected > 0 {
            let rng = ChaCha8Rng::seed_from_u64(opts.seed ^ slice_index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let (vals, res) = lanczos_slice(&mut pencil, a, b, expected, values.len(), spacing, opts, rng)?;
            max_residual = max_residual.max(res);
            values.extend(vals);
        }
        if expected > 0 {
            width = (b - a) * target as f64 / expected as f64;
        }
        a = b;
        below_a = below_b;
        slice_index += 1;
    }
    values.sort_by(f64::total_cmp);
    let lambda_complete = match request {
        EigenRequest::Count(c) => {
            values.truncate(c);
            *values.last().unwrap_or(&0.0)
        }
        EigenRequest::Threshold(t) => {
            values.retain(|&v| v < t);
            t
        }
    };
    Ok(EigenSolution { values, lambda_complete, max_residual })
}

/// All `expected` eigenvalues in `[a, b)`; `base` is the number of
/// eigenvalues below `a` (for error reporting).
#[allow(clippy::too_many_arguments)]
fn lanczos_slice(
    pencil: &mut Pencil,
    a: f64,
    b: f64,
    expected: usize,
    base: usize,
    spacing: f64,
    opts: &EigenOptions,
    mut rng: ChaCha8Rng,
) -> Result<(Vec<f64>, f64)> {
    let n = pencil.k.n();
    let (sigma, ldl) = pencil.factor_near(0.5 * (a + b), spacing)?;
    let m_max = n.min((3 * expected + 40).max(60));
    let ritz_tol = 0.05 * opts.residual_tol;
    let check_every = 8;

    let mut locked_x: Vec<Vec<f64>> = Vec::new();
    let mut locked_mx: Vec<Vec<f64>> = Vec::new();
    let mut locked_vals: Vec<f64> = Vec::new();
    let mut max_res: f64 = 0.0;
    let mut carry: Option<Vec<f64>> = None;
    let in_slice = |lam: f64| lam >= a && lam < b;

    for _restart in 0..=opts.max_restarts {
        let mut v0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        if let Some(c) = carry.take() {
            let cn = dot(&c, &c).sqrt();
            let vn = dot(&v0, &v0).sqrt();
            for (vi, ci) in v0.iter_mut().zip(&c) {
                *vi = 1e-3 * *vi / vn + ci / cn;
            }
        }
        let mut basis_v: Vec<Vec<f64>> = Vec::with_capacity(m_max);
        let mut basis_mv: Vec<Vec<f64>> = Vec::with_capacity(m_max);
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();

        let mut w = v0;
        let mut mw = vec![0.0; n];
        pencil.m.matvec_into(&w, &mut mw);
        orthogonalize(&mut w, &mut mw, &locked_x, &locked_mx, &[], &[], pencil);
        let nrm = dot(&w, &mw).sqrt();
        if !(nrm > 0.0) {
            break;
        }
        w.iter_mut().for_each(|x| *x /= nrm);
        mw.iter_mut().for_each(|x| *x /= nrm);
        basis_v.push(w);
        basis_mv.push(mw);

        let mut accepted: Option<Vec<(f64, Vec<f64>, Vec<f64>, f64)>> = None;
        let mut last_ritz: Option<(Vec<f64>, Vec<f64>)> = None;
        let (mut prev_conv, mut stale) = (usize::MAX, 0);
        loop {
            let j = basis_v.len() - 1;
            let mut w = basis_mv[j].clone();
            ldl.solve_in_place(&mut w);
            let mut mw = vec![0.0; n];
            pencil.m.matvec_into(&w, &mut mw);
            let coef = orthogonalize(&mut w, &mut mw, &locked_x, &locked_mx, &basis_v, &basis_mv, pencil);
            alpha.push(coef[j]);
            let bnorm = dot(&w, &mw).max(0.0).sqrt();
            let steps = alpha.len();
            let theta_scale = alpha.iter().fold(0.0f64, |s, x| s.max(x.abs())).max(1e-300);
            let breakdown = bnorm <= 1e-12 * theta_scale;
            let full = steps >= m_max || basis_v.len() + locked_x.len() >= n;
            if steps % check_every == 0 || breakdown || full {
                let (theta, last) = tridiagonal_eigen(&alpha, &beta, &[steps - 1])?;
                let resid: Vec<f64> = last[0].iter().map(|s| (bnorm * s).abs()).collect();
                let conv: Vec<usize> = (0..steps)
                    .filter(|&i| {
                        let lam = sigma + 1.0 / theta[i];
                        in_slice(lam) && resid[i] <= ritz_tol * theta[i].abs()
                    })
                    .collect();
                let pending = (0..steps)
                    .filter(|&i| in_slice(sigma + 1.0 / theta[i]) && resid[i] > ritz_tol * theta[i].abs())
                    .count();
                // Nothing left to converge in this Krylov space: the rest are
                // copies of repeated eigenvalues.
                if pending == 0 && conv.len() == prev_conv {
                    stale += 1;
                } else {
                    stale = 0;
                }
                prev_conv = conv.len();
                let stop = breakdown || full || stale >= 2;
                last_ritz = Some((theta.clone(), resid));
                if conv.len() + locked_vals.len() >= expected || stop {
                    let pairs = ritz_pairs(&alpha, &beta, &basis_v, &basis_mv, &conv, sigma)?;
                    let mut good = Vec::new();
                    for (lam, x, mx) in pairs {
                        let r = pencil.backward_error(lam, &x, &mx);
                        if r <= opts.residual_tol {
                            good.push((lam, x, mx, r));
                        }
                    }
                    if good.len() + locked_vals.len() == expected {
                        accepted = Some(good);
                        break;
                    }
                    if stop || good.len() + locked_vals.len() > expected {
                        accepted = Some(good);
                        break;
                    }
                }
            }
            if breakdown || full {
                break;
            }
            beta.push(bnorm);
            w.iter_mut().for_each(|x| *x /= bnorm);
            mw.iter_mut().for_each(|x| *x /= bnorm);
            basis_v.push(w);
            basis_mv.push(mw);
        }

        let mut good = accepted.unwrap_or_default();
        if good.len() + locked_vals.len() > expected {
            // More converged values than the inertia allows: keep the best.
            good.sort_by(|x, y| x.3.total_cmp(&y.3));
            good.truncate(expected - locked_vals.len());
        }
        for (lam, x, mx, r) in good {
            max_res = max_res.max(r);
            locked_vals.push(lam);
            locked_x.push(x);
            locked_mx.push(mx);
        }
        if locked_vals.len() == expected {
            locked_vals.sort_by(f64::total_cmp);
            return Ok((locked_vals, max_res));
        }
        // Continue from the unconverged in-slice Ritz directions.
        if let Some((theta, resid)) = last_ritz {
            let steps = alpha.len();
            let pending: Vec<usize> = (0..steps)
                .filter(|&i| in_slice(sigma + 1.0 / theta[i]) && resid[i] > ritz_tol * theta[i].abs())
                .collect();
            if !pending.is_empty() {
                let pairs = ritz_pairs(&alpha, &beta, &basis_v, &basis_mv, &pending, sigma)?;
                let mut c = vec![0.0; n];
                for (_, x, _) in &pairs {
                    axpy(1.0, x, &mut c);
                }
                carry = Some(c);
            }
        }
    }
    Err(Error::ConvergenceFailure { index: base + locked_vals.len() })
}

/// Removes the `M`-projections onto the locked and basis vectors from `w`
/// (twice when cancellation is severe) and returns the basis coefficients.
fn orthogonalize(
    w: &mut [f64],
    mw: &mut [f64],
    locked_x: &[Vec<f64>],
    locked_mx: &[Vec<f64>],
    basis_v: &[Vec<f64>],
    basis_mv: &[Vec<f64>],
    pencil: &Pencil,
) -> Vec<f64> {
    let mut total = vec![0.0; basis_v.len()];
    let before = dot(w, mw).max(0.0).sqrt();
    for pass in 0..2 {
        for (x, mx) in locked_x.iter().zip(locked_mx) {
            let c = dot(w, mx);
            axpy(-c, x, w);
        }
        for (i, mv) in basis_mv.iter().enumerate() {
            let c = dot(w, mv);
            total[i] += c;
            axpy(-c, &basis_v[i], w);
        }
        pencil.m.matvec_into(w, mw);
        let after = dot(w, mw).max(0.0).sqrt();
        if pass == 0 && after > 0.7 * before {
            break;
        }
    }
    total
}

/// Ritz pairs `(lambda, x, M x)` for the listed Ritz indices.
fn ritz_pairs(
    alpha: &[f64],
    beta: &[f64],
    basis_v: &[Vec<f64>],
    basis_mv: &[Vec<f64>],
    which: &[usize],
    sigma: f64,
) -> Result<Vec<(f64, Vec<f64>, Vec<f64>)>> {
    if which.is_empty() {
        return Ok(Vec::new());
    }
    let steps = alpha.len();
    let rows: Vec<usize> = (0..steps).collect();
    let (theta, z) = tridiagonal_eigen(alpha, beta, &rows)?;
    let n = basis_v[0].len();
    Ok(which
        .iter()
        .map(|&i| {
            let mut x = vec![0.0; n];
            let mut mx = vec![0.0; n];
            for (r, zr) in z.iter().enumerate() {
                axpy(zr[i], &basis_v[r], &mut x);
                axpy(zr[i], &basis_mv[r], &mut mx);
            }
            (sigma + 1.0 / theta[i], x, mx)
        })
        .collect())
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `diag` and
/// off-diagonal `off` (length `diag.len() - 1`), by implicit QL.
///
/// Only the eigenvector rows listed in `rows` are accumulated: entry
/// `[r][i]` of the result is component `rows[r]` of eigenvector `i`.
/// Eigenvalues are returned unsorted, aligned with the eigenvector columns.
pub fn tridiagonal_eigen(diag: &[f64], off: &[f64], rows: &[usize]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[..n.saturating_sub(1)]);
    let mut z: Vec<Vec<f64>> = rows
        .iter()
        .map(|&r| {
            let mut row = vec![0.0; n];
            row[r] = 1.0;
            row
        })
        .collect();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::ConvergenceFailure { index: l });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for zr in z.iter_mut() {
                    let f = zr[i + 1];
                    zr[i + 1] = s * zr[i] + c * f;
                    zr[i] = c * zr[i] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok((d, z))
}
