//! Dynamic network series, order-preserving splits, the candidate change-point
//! grid, segment means, and the smoothed (`Z`) and raw (`E`) CUSUM matrices.
//!
//! Only entries with `i < j` are data. Diagonals are carried along in the
//! dense matrices but never summed by any statistic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symmat::{check_permutation, ed_truncate, SymMatrix};

// ---------------------------------------------------------------------------
// NetSeries
// ---------------------------------------------------------------------------

/// A time-ordered sequence of undirected, unweighted snapshots on `n` nodes.
///
/// Snapshots are stored as sorted edge lists `(i, j)` with `i < j`, which keeps
/// large sparse series (thousands of nodes, a few hundred edges per snapshot)
/// cheap to hold. [`NetSeries::snapshot`] materialises the dense adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetSeries {
    n: usize,
    snapshots: Vec<Vec<(u32, u32)>>,
}

impl NetSeries {
    /// Validates and normalises edge lists. Each pair may be given in either
    /// orientation; self-loops, out-of-range nodes and duplicates are rejected.
    pub fn from_edge_lists(n: usize, snapshots: Vec<Vec<(usize, usize)>>) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("a network needs at least 2 nodes, got {n}")));
        }
        if n > u32::MAX as usize {
            return Err(Error::invalid("node count exceeds u32 range"));
        }
        if snapshots.is_empty() {
            return Err(Error::invalid("a series needs at least one snapshot"));
        }
        let mut out = Vec::with_capacity(snapshots.len());
        for (t, edges) in snapshots.into_iter().enumerate() {
            let mut norm = Vec::with_capacity(edges.len());
            for (i, j) in edges {
                if i == j {
                    return Err(Error::invalid(format!("self-loop ({i}, {i}) at time {t}")));
                }
                if i >= n || j >= n {
                    return Err(Error::invalid(format!("edge ({i}, {j}) out of range at time {t}")));
                }
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                norm.push((a as u32, b as u32));
            }
            norm.sort_unstable();
            if let Some(w) = norm.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::invalid(format!(
                    "duplicate edge ({}, {}) at time {t}",
                    w[0].0, w[0].1
                )));
            }
            out.push(norm);
        }
        Ok(Self { n, snapshots: out })
    }

    /// Builds a series from dense binary, zero-diagonal adjacency matrices.
    pub fn from_dense(mats: &[SymMatrix]) -> Result<Self> {
        let n = mats.first().ok_or_else(|| Error::invalid("empty series"))?.n();
        let mut lists = Vec::with_capacity(mats.len());
        for (t, m) in mats.iter().enumerate() {
            if m.n() != n {
                return Err(Error::invalid(format!("snapshot {t} has dimension {}, expected {n}", m.n())));
            }
            let mut edges = Vec::new();
            for i in 0..n {
                if m.get(i, i) != 0.0 {
                    return Err(Error::invalid(format!("snapshot {t} has a nonzero diagonal")));
                }
                for j in (i + 1)..n {
                    match m.get(i, j) {
                        0.0 => {}
                        1.0 => edges.push((i, j)),
                        v => {
                            return Err(Error::invalid(format!(
                                "snapshot {t} entry ({i}, {j}) = {v} is not binary"
                            )))
                        }
                    }
                }
            }
            lists.push(edges);
        }
        Self::from_edge_lists(n, lists)
    }

    /// Trusted constructor for already-normalised lists (sorted, `i < j`, unique).
    pub(crate) fn from_sorted_unchecked(n: usize, snapshots: Vec<Vec<(u32, u32)>>) -> Self {
        debug_assert!(snapshots
            .iter()
            .all(|s| s.windows(2).all(|w| w[0] < w[1]) && s.iter().all(|&(i, j)| i < j && (j as usize) < n)));
        Self { n, snapshots }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of snapshots `T`.
    #[inline]
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Edges of snapshot `t` (0-based), sorted with `i < j`.
    pub fn edges(&self, t: usize) -> &[(u32, u32)] {
        &self.snapshots[t]
    }

    pub fn total_edges(&self) -> usize {
        self.snapshots.iter().map(Vec::len).sum()
    }

    /// Dense adjacency matrix of snapshot `t` (0-based).
    pub fn snapshot(&self, t: usize) -> SymMatrix {
        let mut m = SymMatrix::zeros(self.n).expect("n >= 2 by construction");
        for &(i, j) in &self.snapshots[t] {
            m.set(i as usize, j as usize, 1.0);
        }
        m
    }

    /// Sub-series of the given 0-based snapshot indices, in order.
    pub fn select(&self, idx: impl IntoIterator<Item = usize>) -> Self {
        let snapshots = idx.into_iter().map(|t| self.snapshots[t].clone()).collect();
        Self { n: self.n, snapshots }
    }

    /// Same snapshots in reverse time order.
    pub fn reversed(&self) -> Self {
        self.select((0..self.len()).rev())
    }

    /// Relabels nodes so that new node `i` is old node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n)?;
        let mut inv = vec![0usize; self.n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let lists = self
            .snapshots
            .iter()
            .map(|s| s.iter().map(|&(i, j)| (inv[i as usize], inv[j as usize])).collect())
            .collect();
        Self::from_edge_lists(self.n, lists)
    }

    /// Entrywise mean of the snapshots at the given 0-based indices.
    pub fn mean_over(&self, idx: impl IntoIterator<Item = usize>) -> SymMatrix {
        let mut m = SymMatrix::zeros(self.n).expect("n >= 2 by construction");
        let mut count = 0usize;
        for t in idx {
            count += 1;
            for &(i, j) in &self.snapshots[t] {
                m.add_at(i as usize, j as usize, 1.0);
            }
        }
        if count > 0 {
            m.scale(1.0 / count as f64);
        }
        m
    }
}

// ---------------------------------------------------------------------------
// Edge sets
// ---------------------------------------------------------------------------

/// A set of node pairs `(i, j)` with `i < j`, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EdgeSet(Vec<(usize, usize)>);

impl EdgeSet {
    /// The full off-diagonal index set `{(i, j) : i < j}`.
    pub fn all(n: usize) -> Self {
        Self((0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect())
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Normalises orientation and order; duplicates and self-pairs are dropped.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut v: Vec<_> = pairs
            .into_iter()
            .filter(|(i, j)| i != j)
            .map(|(i, j)| if i < j { (i, j) } else { (j, i) })
            .collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        let key = if i < j { (i, j) } else { (j, i) };
        self.0.binary_search(&key).is_ok()
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.iter().all(|(i, j)| other.contains(i, j))
    }

    /// Image under a node relabeling where old node `perm[new]` becomes `new`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut inv = vec![0usize; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        Self::from_pairs(self.iter().map(|(i, j)| (inv[i], inv[j])))
    }

    pub fn max_node(&self) -> Option<usize> {
        self.0.iter().map(|&(_, j)| j).max()
    }
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

/// Two or three interleaved sub-series of equal length.
#[derive(Debug, Clone)]
pub struct SplitSeries {
    parts: Vec<NetSeries>,
}

impl SplitSeries {
    pub fn parts(&self) -> &[NetSeries] {
        &self.parts
    }

    pub fn part(&self, k: usize) -> &NetSeries {
        &self.parts[k]
    }

    pub fn folds(&self) -> usize {
        self.parts.len()
    }

    /// Common length of every part.
    pub fn part_len(&self) -> usize {
        self.parts[0].len()
    }

    pub fn n(&self) -> usize {
        self.parts[0].n()
    }

    /// Swaps parts `a` and `b`.
    pub fn swapped(&self, a: usize, b: usize) -> Self {
        let mut parts = self.parts.clone();
        parts.swap(a, b);
        Self { parts }
    }
}

/// Order-preserving `folds`-way interleaving. Part `k` (0-based) holds raw
/// snapshots `k, k + folds, k + 2*folds, ...`; a trailing remainder is dropped.
pub fn split(series: &NetSeries, folds: usize) -> Result<SplitSeries> {
    if folds != 2 && folds != 3 {
        return Err(Error::invalid(format!("folds must be 2 or 3, got {folds}")));
    }
    if series.len() < 2 * folds {
        return Err(Error::invalid(format!(
            "series too short: {} snapshots cannot be split {folds} ways (need at least {})",
            series.len(),
            2 * folds
        )));
    }
    let len = series.len() / folds;
    let parts = (0..folds).map(|k| series.select((0..len).map(|t| folds * t + k))).collect();
    Ok(SplitSeries { parts })
}

// ---------------------------------------------------------------------------
// Candidate change points
// ---------------------------------------------------------------------------

/// Strictly increasing candidate window lengths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TauGrid(Vec<usize>);

impl TauGrid {
    /// Validates an explicit grid against a series of length `t_len`.
    pub fn new(taus: Vec<usize>, t_len: usize) -> Result<Self> {
        let max = max_tau(t_len);
        if taus.is_empty() {
            return Err(Error::invalid("candidate grid is empty"));
        }
        if taus.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!("candidate grid {taus:?} is not strictly increasing")));
        }
        if taus[0] < 2 || taus[taus.len() - 1] > max {
            return Err(Error::invalid(format!(
                "candidate grid {taus:?} must lie in [2, {max}] for a series of length {t_len}"
            )));
        }
        Ok(Self(taus))
    }

    pub fn taus(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Largest admissible window: `floor((T + 1) / 2)`.
pub fn max_tau(t_len: usize) -> usize {
    t_len.div_ceil(2)
}

/// `tau_j = round(2^j h T)` for `j = 0 ..= floor(log2(1 / (2h)))`, clamped to
/// `[2, floor((T+1)/2)]` and deduplicated, unless `override_taus` is given.
pub fn candidate_taus(t_len: usize, h: f64, override_taus: Option<&[usize]>) -> Result<TauGrid> {
    if !(h > 0.0 && h < 0.5) {
        return Err(Error::invalid(format!("bandwidth h must lie in (0, 0.5), got {h}")));
    }
    if let Some(o) = override_taus {
        return TauGrid::new(o.to_vec(), t_len);
    }
    let max = max_tau(t_len);
    if max < 2 {
        return Err(Error::invalid(format!("series of length {t_len} admits no candidate window")));
    }
    let levels = ((1.0 / (2.0 * h)).log2() + 1e-9).floor() as i32;
    let mut taus: Vec<usize> = (0..=levels)
        .map(|j| ((2f64.powi(j) * h * t_len as f64).round() as usize).clamp(2, max))
        .collect();
    taus.sort_unstable();
    taus.dedup();
    TauGrid::new(taus, t_len)
}

/// Boundary window length `round(h T)`, at least 1.
pub fn boundary_window(t_len: usize, h: f64) -> usize {
    ((h * t_len as f64).round() as usize).max(1)
}

// ---------------------------------------------------------------------------
// Segment statistics
// ---------------------------------------------------------------------------

fn check_tau(series: &NetSeries, tau: usize) -> Result<()> {
    let max = max_tau(series.len());
    if tau == 0 || tau > max {
        return Err(Error::invalid(format!(
            "window {tau} outside 1..={max} for a series of length {}",
            series.len()
        )));
    }
    Ok(())
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::invalid(format!("sparsity rho must be positive, got {rho}")));
    }
    Ok(())
}

/// Means of the first `tau` and last `tau` snapshots.
pub fn segment_means(series: &NetSeries, tau: usize) -> Result<(SymMatrix, SymMatrix)> {
    check_tau(series, tau)?;
    let t = series.len();
    Ok((series.mean_over(0..tau), series.mean_over(t - tau..t)))
}

/// `sqrt(tau / (2 rho)) * (ED_k(left mean) - ED_k(right mean))`.
pub fn z_matrix(series: &NetSeries, tau: usize, rho: f64, k: usize) -> Result<SymMatrix> {
    check_rho(rho)?;
    let (left, right) = segment_means(series, tau)?;
    let mut z = ed_truncate(&left, k)?.sub(&ed_truncate(&right, k)?)?;
    z.scale((tau as f64 / (2.0 * rho)).sqrt());
    Ok(z)
}

/// `sqrt(tau / (2 rho)) * (left mean - right mean)`.
pub fn e_matrix(series: &NetSeries, tau: usize, rho: f64) -> Result<SymMatrix> {
    check_rho(rho)?;
    let (left, right) = segment_means(series, tau)?;
    let mut e = left.sub(&right)?;
    e.scale((tau as f64 / (2.0 * rho)).sqrt());
    Ok(e)
}
