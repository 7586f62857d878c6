//! Dense symmetric matrices and the spectral operations built on them.
//!
//! [`SymMatrix`] carries every matrix in the pipeline: adjacency snapshots,
//! segment means, smoothed means, residuals and CUSUM matrices. Symmetry is
//! enforced by construction: every writer updates `(i, j)` and `(j, i)`
//! together, so the buffer never drifts out of symmetry.
//!
//! Eigenpairs are ordered by descending absolute eigenvalue. Near-ties in
//! magnitude are broken by descending signed eigenvalue, and each eigenvector
//! is oriented so its entry of largest magnitude is nonnegative. This makes
//! the rank-K truncation ([`ed_truncate`]) a deterministic function of its input.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance under which two eigenvalue magnitudes count as tied.
const TIE_RTOL: f64 = 1e-10;

/// Dense real symmetric matrix of dimension `n >= 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("matrix dimension must be at least 2, got {n}")));
        }
        Ok(Self { n, data: vec![0.0; n * n] })
    }

    /// Builds a matrix by evaluating `f(i, j)` on the upper triangle (`i <= j`)
    /// and mirroring it.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut m = Self::zeros(n)?;
        for i in 0..n {
            for j in i..n {
                m.set(i, j, f(i, j));
            }
        }
        Ok(m)
    }

    /// Builds a matrix from explicit rows. The rows must describe a square,
    /// symmetric array (exact equality of mirrored entries).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("rows do not form a square matrix"));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::invalid(format!(
                        "matrix is not symmetric at ({i}, {j}): {} vs {}",
                        rows[i][j], rows[j][i]
                    )));
                }
            }
        }
        Self::from_fn(n, |i, j| rows[i][j])
    }

    /// `c * 1 1^T` with the diagonal left at `c` as well.
    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::from_fn(n, |_, _| c)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
        if i != j {
            self.data[j * self.n + i] += v;
        }
    }

    /// Row-major view of the full `n x n` buffer.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn zero_diagonal(&mut self) {
        for i in 0..self.n {
            self.data[i * self.n + i] = 0.0;
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.scale(c);
        out
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::invalid(format!("dimension mismatch: {} vs {}", self.n, other.n)));
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { n: self.n, data })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { n: self.n, data })
    }

    /// Entrywise `(self + other) / 2`.
    pub fn midpoint(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| 0.5 * (a + b)).collect();
        Ok(Self { n: self.n, data })
    }

    /// Largest absolute entry over the whole matrix.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest absolute entry over `i != j`.
    pub fn max_abs_offdiag(&self) -> f64 {
        let mut m = 0.0_f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                m = m.max(self.get(i, j).abs());
            }
        }
        m
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.n, other.n);
        self.data.iter().zip(&other.data).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Relabels nodes: `out[i][j] = self[perm[i]][perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n)?;
        Self::from_fn(self.n, |i, j| self.get(perm[i], perm[j]))
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::invalid(format!("permutation has length {}, expected {n}", perm.len())));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::invalid("not a permutation"));
        }
    }
    Ok(())
}

/// Eigenpairs of a [`SymMatrix`], ordered by descending `|lambda|`.
#[derive(Debug, Clone)]
pub struct SpectralDecomp {
    n: usize,
    values: Vec<f64>,
    /// Column-major: eigenvector `k` occupies `vectors[k*n .. (k+1)*n]`.
    vectors: Vec<f64>,
}

impl SpectralDecomp {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k * self.n..(k + 1) * self.n]
    }

    /// `sum_{j < k} lambda_j v_j v_j^T`.
    pub fn reconstruct(&self, k: usize) -> SymMatrix {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for r in 0..k.min(n) {
            let lam = self.values[r];
            let v = self.vector(r);
            for i in 0..n {
                let li = lam * v[i];
                if li == 0.0 {
                    continue;
                }
                let row = &mut data[i * n..];
                for j in i..n {
                    row[j] += li * v[j];
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                data[j * n + i] = data[i * n + j];
            }
        }
        SymMatrix { n, data }
    }
}

/// Full symmetric eigendecomposition with deterministic ordering and signs.
pub fn eigh_sym(m: &SymMatrix) -> Result<SpectralDecomp> {
    if !m.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let n = m.n();
    let max_iter = 1000 * n;
    let eig = SymmetricEigen::try_new(m.to_nalgebra(), f64::EPSILON, max_iter).ok_or(
        Error::NoConvergence { norm: m.frobenius(), iterations: max_iter },
    )?;

    let mut vectors: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            orient(&mut v);
            v
        })
        .collect();
    let raw_values: Vec<f64> = eig.eigenvalues.iter().copied().collect();

    let order = spectral_order(&raw_values, &vectors);
    let values = order.iter().map(|&k| raw_values[k]).collect();
    let mut flat = Vec::with_capacity(n * n);
    for &k in &order {
        flat.append(&mut vectors[k]);
    }
    Ok(SpectralDecomp { n, values, vectors: flat })
}

/// Flip `v` so that its entry of largest magnitude (first one on ties) is nonnegative.
fn orient(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn spectral_order(values: &[f64], vectors: &[Vec<f64>]) -> Vec<usize> {
    use std::cmp::Ordering;

    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = TIE_RTOL * scale.max(f64::MIN_POSITIVE);

    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()));

    let tiebreak = |&a: &usize, &b: &usize| -> Ordering {
        if (values[a] - values[b]).abs() > tol {
            return values[b].total_cmp(&values[a]);
        }
        for (x, y) in vectors[a].iter().zip(&vectors[b]) {
            match y.total_cmp(x) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    };

    let mut start = 0;
    while start < idx.len() {
        let head = values[idx[start]].abs();
        let mut end = start + 1;
        while end < idx.len() && head - values[idx[end]].abs() <= tol {
            end += 1;
        }
        idx[start..end].sort_by(tiebreak);
        start = end;
    }
    idx
}

/// Rank-`k` spectral truncation: the reconstruction from the `k` eigenpairs
/// of largest absolute eigenvalue. The diagonal is not re-zeroed.
pub fn ed_truncate(m: &SymMatrix, k: usize) -> Result<SymMatrix> {
    if k == 0 || k > m.n() {
        return Err(Error::invalid(format!("truncation rank {k} outside 1..={}", m.n())));
    }
    Ok(eigh_sym(m)?.reconstruct(k))
}

/// Operator (spectral) norm, i.e. the largest absolute eigenvalue.
///
/// Small matrices use the dense eigenvalues; larger ones a Lanczos iteration
/// with full reorthogonalisation, run until the extreme Ritz value settles.
pub fn spectral_norm(m: &SymMatrix) -> Result<f64> {
    if !m.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    if m.n() < LANCZOS_MIN_DIM {
        return Ok(dense_spectral_norm(m));
    }
    Ok(lanczos_spectral_norm(m))
}

const LANCZOS_MIN_DIM: usize = 48;

fn dense_spectral_norm(m: &SymMatrix) -> f64 {
    let values = m.to_nalgebra().symmetric_eigenvalues();
    values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

fn tridiagonal_abs_max(alphas: &[f64], betas: &[f64]) -> f64 {
    let k = alphas.len();
    let mut t = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    t.symmetric_eigenvalues().iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

fn lanczos_spectral_norm(m: &SymMatrix) -> f64 {
    let n = m.n();
    let a = m.as_slice();
    let scale = m.frobenius();
    if scale == 0.0 {
        return 0.0;
    }
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();

    // fixed pseudo-random start so results are reproducible
    let mut state = 0x9E37_79B9_7F4A_7C15_u64;
    let mut v: Vec<f64> = (0..n)
        .map(|_| (crate::statutil::splitmix64(&mut state) >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
        .collect();
    let norm = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut last = f64::NAN;
    let mut settled = 0;
    let mut w = vec![0.0; n];
    for step in 0..n {
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = dot(&a[i * n..(i + 1) * n], &v);
        }
        let alpha = dot(&w, &v);
        alphas.push(alpha);
        basis.push(v.clone());
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let beta = dot(&w, &w).sqrt();
        let exhausted = beta <= 1e-12 * scale || step + 1 == n;
        if exhausted || step % 4 == 3 {
            let ritz = tridiagonal_abs_max(&alphas, &betas);
            if exhausted {
                return ritz;
            }
            if (ritz - last).abs() <= 1e-13 * ritz {
                settled += 1;
                if settled >= 2 {
                    return ritz;
                }
            } else {
                settled = 0;
            }
            last = ritz;
        }
        betas.push(beta);
        v.iter_mut().zip(&w).for_each(|(x, y)| *x = y / beta);
    }
    tridiagonal_abs_max(&alphas, &betas)
}

/// Leading-eigenvector centrality, rescaled so the largest score is 1.
pub fn eigenvector_centrality(m: &SymMatrix) -> Result<Vec<f64>> {
    if m.as_slice().iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::invalid("centrality requires a finite nonnegative matrix"));
    }
    if m.max_abs() == 0.0 {
        return Err(Error::Degenerate("centrality of an all-zero matrix is undefined".into()));
    }
    let decomp = eigh_sym(m)?;
    // For a nonnegative matrix the Perron root is the largest eigenvalue and
    // dominates in magnitude; the ordering's signed tie-break puts it first.
    let mut c: Vec<f64> = decomp.vector(0).iter().map(|x| x.abs()).collect();
    let top = c.iter().copied().fold(0.0_f64, f64::max);
    c.iter_mut().for_each(|x| *x /= top);
    Ok(c)
}
