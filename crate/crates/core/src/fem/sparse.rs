//! Symmetric sparse matrices and an up-looking `L D L^T` factorization.
//!
//! The factorization does not pivot. Its inertia (the number of negative
//! entries of `D`) counts the eigenvalues of a pencil below the shift.

use crate::{Error, Result};

/// Square sparse matrix in compressed-row form with sorted column indices.
/// Symmetric matrices store both triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets, summing duplicates in input order.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&i| (triplets[i].0, triplets[i].1));
        let mut indptr = vec![0; n + 1];
        let mut indices = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for &i in &order {
            let (r, c, v) = triplets[i];
            assert!(r < n && c < n, "triplet index out of range");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            indptr[r + 1] += indptr[r];
        }
        Self { n, indptr, indices, values }
    }

    pub fn from_dense(a: &[Vec<f64>]) -> Self {
        let n = a.len();
        let trip: Vec<_> = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| a[i][j] != 0.0).map(move |j| (i, j, a[i][j])))
            .collect();
        Self::from_triplets(n, &trip)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|p| vals[p]).unwrap_or(0.0)
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).all(|(&j, &v)| (v - self.get(j, i)).abs() <= tol * v.abs().max(1.0))
        })
    }

    /// `P A P^T` where row `i` of the result is row `perm[i]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        let mut inv = vec![0; self.n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut indptr = vec![0; self.n + 1];
        let mut indices = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        let mut row: Vec<(usize, f64)> = Vec::new();
        for (new, &old) in perm.iter().enumerate() {
            let (cols, vals) = self.row(old);
            row.clear();
            row.extend(cols.iter().zip(vals).map(|(&j, &v)| (inv[j], v)));
            row.sort_by_key(|e| e.0);
            for &(j, v) in &row {
                indices.push(j);
                values.push(v);
            }
            indptr[new + 1] = indices.len();
        }
        Self { n: self.n, indptr, indices, values }
    }

    /// Whether `other` has exactly the same sparsity pattern.
    pub fn same_pattern(&self, other: &CsrMatrix) -> bool {
        self.n == other.n && self.indptr == other.indptr && self.indices == other.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Elimination tree and column pointers of `L` for a fixed pattern.
#[derive(Debug, Clone)]
pub struct LdlSymbolic {
    n: usize,
    parent: Vec<usize>,
    lp: Vec<usize>,
}

const NONE: usize = usize::MAX;

impl LdlSymbolic {
    pub fn new(a: &CsrMatrix) -> Self {
        let n = a.n();
        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for &j in a.row(k).0 {
                let mut i = j;
                if i >= k {
                    continue;
                }
                while flag[i] != k {
                    if parent[i] == NONE {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut lp = vec![0; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }
        Self { n, parent, lp }
    }

    pub fn nnz_l(&self) -> usize {
        self.lp[self.n]
    }
}

/// Numeric `A = L D L^T` factor with unit lower-triangular `L` stored by columns.
#[derive(Debug, Clone)]
pub struct Ldl {
    n: usize,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
}

impl Ldl {
    /// Factors the matrix whose values are `values` on the pattern of
    /// `pattern`. A pivot smaller than `pivot_tol` times the diagonal entry
    /// is reported as [`Error::SingularPivot`].
    pub fn factor(sym: &LdlSymbolic, pattern: &CsrMatrix, values: &[f64], pivot_tol: f64) -> Result<Self> {
        let n = sym.n;
        let nnz = sym.nnz_l();
        let mut li = vec![0usize; nnz];
        let mut lx = vec![0.0; nnz];
        let mut d = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut pattern_buf = vec![0usize; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            let start = pattern.indptr[k];
            let mut diag = 0.0;
            for (off, &j) in pattern.row(k).0.iter().enumerate() {
                if j > k {
                    break;
                }
                let v = values[start + off];
                y[j] += v;
                if j == k {
                    diag = v;
                }
                let mut len = 0;
                let mut i = j;
                while flag[i] != k {
                    pattern_buf[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = sym.parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern_buf[top] = pattern_buf[len];
                }
            }
            let mut dk = y[k];
            y[k] = 0.0;
            for t in top..n {
                let i = pattern_buf[t];
                let yi = y[i];
                y[i] = 0.0;
                let p0 = sym.lp[i];
                let p2 = p0 + lnz[i];
                for p in p0..p2 {
                    y[li[p]] -= lx[p] * yi;
                }
                let lki = yi / d[i];
                dk -= lki * yi;
                li[p2] = k;
                lx[p2] = lki;
                lnz[i] += 1;
            }
            if !(dk.abs() > pivot_tol * diag.abs()) || !dk.is_finite() {
                return Err(Error::SingularPivot { column: k });
            }
            d[k] = dk;
        }
        Ok(Self { n, lp: sym.lp.clone(), li, lx, d })
    }

    /// Number of negative pivots.
    pub fn inertia(&self) -> usize {
        self.d.iter().filter(|&&x| x < 0.0).count()
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        for j in 0..self.n {
            let xj = x[j];
            if xj != 0.0 {
                for p in self.lp[j]..self.lp[j + 1] {
                    x[self.li[p]] -= self.lx[p] * xj;
                }
            }
        }
        for (xj, dj) in x.iter_mut().zip(&self.d) {
            *xj /= dj;
        }
        for j in (0..self.n).rev() {
            let mut s = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                s -= self.lx[p] * x[self.li[p]];
            }
            x[j] = s;
        }
    }
}

/// Nested-dissection order of nodes on an integer grid whose edges join
/// nodes at most one step apart in each coordinate direction, with the
/// diagonal running along `(+1, +1)`.
pub fn grid_nested_dissection(coords: &[(i64, i64)]) -> Vec<usize> {
    let mut out = Vec::with_capacity(coords.len());
    let mut idx: Vec<usize> = (0..coords.len()).collect();
    dissect(coords, &mut idx, &mut out);
    out
}

fn dissect(coords: &[(i64, i64)], idx: &mut [usize], out: &mut Vec<usize>) {
    if idx.len() <= 48 {
        idx.sort_by_key(|&i| (coords[i].1, coords[i].0));
        out.extend_from_slice(idx);
        return;
    }
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (i64::MAX, i64::MIN, i64::MAX, i64::MIN);
    for &i in idx.iter() {
        let (x, y) = coords[i];
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    let key = |i: usize| if xmax - xmin >= ymax - ymin { coords[i].0 } else { coords[i].1 };
    let (lo, hi) = if xmax - xmin >= ymax - ymin { (xmin, xmax) } else { (ymin, ymax) };
    if hi - lo < 2 {
        idx.sort_by_key(|&i| (coords[i].1, coords[i].0));
        out.extend_from_slice(idx);
        return;
    }
    let mid = (lo + hi) / 2;
    let mut left: Vec<usize> = idx.iter().copied().filter(|&i| key(i) < mid).collect();
    let mut right: Vec<usize> = idx.iter().copied().filter(|&i| key(i) > mid).collect();
    let mut sep: Vec<usize> = idx.iter().copied().filter(|&i| key(i) == mid).collect();
    dissect(coords, &mut left, out);
    dissect(coords, &mut right, out);
    sep.sort_by_key(|&i| (coords[i].1, coords[i].0));
    out.extend_from_slice(&sep);
}
