//! The empirical MOSAIC test: residual products across a twofold split,
//! nuisance estimates from the boundary windows, data-driven screening, and the
//! normal-calibrated decision over a dyadic grid of window lengths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segstats::{
    boundary_window, candidate_taus, max_tau, segment_means, split, EdgeSet, NetSeries, SplitSeries,
};
use crate::statutil::normal_quantile;
use crate::symmat::{ed_truncate, SymMatrix};

/// Tuning inputs of [`mosaic_test`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosaicConfig {
    /// Working rank `K`.
    pub k: usize,
    /// Bandwidth `h`; the grid starts at `round(h T)`.
    pub h: f64,
    pub alpha: f64,
    /// Screening constant `c_d`.
    pub c_d: f64,
    /// Explicit window lengths (post-split scale), replacing the dyadic grid.
    pub tau_override: Option<Vec<usize>>,
    /// Echoed in reports; the test itself is deterministic.
    pub seed: u64,
}

impl Default for MosaicConfig {
    fn default() -> Self {
        Self { k: 2, h: 0.25, alpha: 0.05, c_d: 1.0, tau_override: None, seed: 0 }
    }
}

impl MosaicConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("working rank K must be at least 1"));
        }
        if !(self.h > 0.0 && self.h < 0.5) {
            return Err(Error::invalid(format!("bandwidth h must lie in (0, 0.5), got {}", self.h)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.c_d > 0.0 && self.c_d.is_finite()) {
            return Err(Error::invalid(format!("c_d must be positive, got {}", self.c_d)));
        }
        Ok(())
    }
}

/// Standardised components at one window length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauComponents {
    pub tau: usize,
    /// `tau * A_tau(S_hat) / sigma(S_hat)`; zero when `S_hat` is empty.
    pub screened: f64,
    /// `tau * A_tau(Omega) / sigma(Omega)`.
    pub omega: f64,
}

/// Outcome of [`mosaic_test`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    /// `max(|A(S_hat)|, |A(Omega)|)`, each branch maximised over the grid
    /// before taking the absolute value.
    pub statistic: f64,
    /// Upper `alpha / (2 |grid|)` normal quantile.
    pub threshold: f64,
    pub reject: bool,
    pub per_tau: Vec<TauComponents>,
    /// Signed maximum of the screened components.
    pub a_screened: f64,
    /// Signed maximum of the full-set components.
    pub a_omega: f64,
    pub screened_edges: usize,
    pub rho_hat: f64,
    pub sigma2_shat: f64,
    pub sigma2_omega: f64,
    /// Window attaining the statistic.
    pub tau_argmax: usize,
}

impl TestReport {
    pub fn grid(&self) -> Vec<usize> {
        self.per_tau.iter().map(|c| c.tau).collect()
    }
}

// ---------------------------------------------------------------------------
// Building blocks
// ---------------------------------------------------------------------------

/// `left mean - ED_k(right mean)` within one split part.
pub fn residual_matrix(part: &NetSeries, tau: usize, k: usize) -> Result<SymMatrix> {
    let (left, right) = segment_means(part, tau)?;
    left.sub(&ed_truncate(&right, k)?)
}

/// Smoothed means of the left-most and right-most boundary windows, averaged
/// over the two parts of a twofold split before truncation.
pub(crate) struct Boundary {
    pub window: usize,
    pub left: SymMatrix,
    pub right: SymMatrix,
}

pub(crate) fn boundary_means(split: &SplitSeries, h: f64, k: usize) -> Result<Boundary> {
    if split.folds() != 2 {
        return Err(Error::invalid("boundary estimates need a twofold split"));
    }
    if !(h > 0.0 && h < 0.5) {
        return Err(Error::invalid(format!("bandwidth h must lie in (0, 0.5), got {h}")));
    }
    let t = split.part_len();
    let window = boundary_window(t, h).min(max_tau(t));
    let (l0, r0) = segment_means(split.part(0), window)?;
    let (l1, r1) = segment_means(split.part(1), window)?;
    Ok(Boundary {
        window,
        left: ed_truncate(&l0.midpoint(&l1)?, k)?,
        right: ed_truncate(&r0.midpoint(&r1)?, k)?,
    })
}

/// `1 / (n^2 T)`, the smallest admissible `rho_hat`.
pub fn rho_floor(n: usize, t_len: usize) -> f64 {
    1.0 / ((n * n) as f64 * t_len as f64)
}

fn rho_from_boundary(b: &Boundary, n: usize, t_len: usize) -> f64 {
    let raw = b.left.max_abs_offdiag().max(b.right.max_abs_offdiag());
    raw.clamp(rho_floor(n, t_len), 1.0)
}

fn sigma2_from_boundary(b: &Boundary, edges: &EdgeSet) -> f64 {
    edges
        .iter()
        .map(|(i, j)| {
            let l = b.left.get(i, j);
            let r = b.right.get(i, j);
            0.5 * (l * l + r * r)
        })
        .sum()
}

/// Screening threshold `4 c_d sqrt(log(e n) / n)`.
pub fn screening_threshold(n: usize, c_d: f64) -> f64 {
    let n = n as f64;
    4.0 * c_d * ((1.0 + n.ln()) / n).sqrt()
}

fn screen_from_boundary(b: &Boundary, rho_hat: f64, c_d: f64) -> EdgeSet {
    let n = b.left.n();
    let scale = (b.window as f64 / (2.0 * rho_hat)).sqrt();
    let cut = screening_threshold(n, c_d);
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if (scale * (b.left.get(i, j) - b.right.get(i, j))).abs() > cut {
                pairs.push((i, j));
            }
        }
    }
    EdgeSet::from_pairs(pairs)
}

/// Maximum off-diagonal entry of the smoothed boundary means, clamped to
/// `[1 / (n^2 T), 1]`.
pub fn estimate_rho(split: &SplitSeries, h: f64, k: usize) -> Result<f64> {
    let b = boundary_means(split, h, k)?;
    Ok(rho_from_boundary(&b, split.n(), split.part_len()))
}

/// Average of the squared smoothed boundary means over `edges`.
pub fn estimate_sigma2(split: &SplitSeries, h: f64, k: usize, edges: &EdgeSet) -> Result<f64> {
    if edges.max_node().is_some_and(|m| m >= split.n()) {
        return Err(Error::invalid("edge set refers to nodes outside the network"));
    }
    let b = boundary_means(split, h, k)?;
    Ok(sigma2_from_boundary(&b, edges))
}

/// Pairs whose smoothed boundary CUSUM exceeds the screening threshold.
pub fn screen_edges(split: &SplitSeries, h: f64, k: usize, rho_hat: f64, c_d: f64) -> Result<EdgeSet> {
    if !(rho_hat > 0.0 && rho_hat.is_finite()) {
        return Err(Error::invalid(format!("rho_hat must be positive, got {rho_hat}")));
    }
    if c_d.is_nan() || c_d <= 0.0 {
        return Err(Error::invalid(format!("c_d must be positive, got {c_d}")));
    }
    let b = boundary_means(split, h, k)?;
    Ok(screen_from_boundary(&b, rho_hat, c_d))
}

/// `sum over edges of a_ij * b_ij`.
pub(crate) fn sum_products(a: &SymMatrix, b: &SymMatrix, edges: &EdgeSet) -> f64 {
    edges.iter().map(|(i, j)| a.get(i, j) * b.get(i, j)).sum()
}

/// `sum over i < j of a_ij * b_ij`.
pub(crate) fn sum_products_all(a: &SymMatrix, b: &SymMatrix) -> f64 {
    let n = a.n();
    let (x, y) = (a.as_slice(), b.as_slice());
    let mut s = 0.0;
    for i in 0..n {
        let row = i * n;
        for j in (i + 1)..n {
            s += x[row + j] * y[row + j];
        }
    }
    s
}

// ---------------------------------------------------------------------------
// The test
// ---------------------------------------------------------------------------

fn signed_max(values: impl Iterator<Item = (usize, f64)>) -> (usize, f64) {
    values.fold((0, f64::NEG_INFINITY), |acc, (t, v)| if v > acc.1 { (t, v) } else { acc })
}

/// Shortest split part that still admits a window of length 2 on both sides.
pub const MIN_PART_LEN: usize = 4;

/// Runs the full empirical test on a raw (unsplit) series.
pub fn mosaic_test(series: &NetSeries, cfg: &MosaicConfig) -> Result<TestReport> {
    cfg.validate()?;
    if series.len() < 2 * MIN_PART_LEN {
        return Err(Error::invalid(format!(
            "series too short: {} snapshots split into parts of length {}, need at least {MIN_PART_LEN}",
            series.len(),
            series.len() / 2
        )));
    }
    let sp = split(series, 2)?;
    let t = sp.part_len();
    let n = sp.n();
    let grid = candidate_taus(t, cfg.h, cfg.tau_override.as_deref())?;

    let boundary = boundary_means(&sp, cfg.h, cfg.k)?;
    let rho_hat = rho_from_boundary(&boundary, n, t);
    let s_hat = screen_from_boundary(&boundary, rho_hat, cfg.c_d);
    let omega = EdgeSet::all(n);
    let floor = rho_floor(n, t).powi(2);
    let sigma2_shat = sigma2_from_boundary(&boundary, &s_hat).max(floor);
    let sigma2_omega = sigma2_from_boundary(&boundary, &omega).max(floor);

    let mut per_tau = Vec::with_capacity(grid.len());
    for &tau in grid.taus() {
        let w0 = residual_matrix(sp.part(0), tau, cfg.k)?;
        let w1 = residual_matrix(sp.part(1), tau, cfg.k)?;
        let a_s = if s_hat.is_empty() { 0.0 } else { sum_products(&w0, &w1, &s_hat) };
        let a_o = sum_products_all(&w0, &w1);
        let tf = tau as f64;
        per_tau.push(TauComponents {
            tau,
            screened: tf * a_s / sigma2_shat.sqrt(),
            omega: tf * a_o / sigma2_omega.sqrt(),
        });
    }

    let (tau_s, a_screened) = signed_max(per_tau.iter().map(|c| (c.tau, c.screened)));
    let (tau_o, a_omega) = signed_max(per_tau.iter().map(|c| (c.tau, c.omega)));
    let (statistic, tau_argmax) =
        if a_screened.abs() >= a_omega.abs() { (a_screened.abs(), tau_s) } else { (a_omega.abs(), tau_o) };
    let threshold = normal_quantile(1.0 - cfg.alpha / (2.0 * grid.len() as f64))?;

    Ok(TestReport {
        statistic,
        threshold,
        reject: statistic > threshold,
        per_tau,
        a_screened,
        a_omega,
        screened_edges: s_hat.len(),
        rho_hat,
        sigma2_shat,
        sigma2_omega,
        tau_argmax,
    })
}

/// `tau * A_tau(S) / sigma(S)` for a fixed edge set and window, the quantity
/// whose null law is standard normal.
pub fn standardized_component(split: &SplitSeries, tau: usize, k: usize, h: f64, edges: &EdgeSet) -> Result<f64> {
    if edges.is_empty() {
        return Err(Error::invalid("standardised component needs a nonempty edge set"));
    }
    let b = boundary_means(split, h, k)?;
    let floor = rho_floor(split.n(), split.part_len()).powi(2);
    let sigma2 = sigma2_from_boundary(&b, edges).max(floor);
    let w0 = residual_matrix(split.part(0), tau, k)?;
    let w1 = residual_matrix(split.part(1), tau, k)?;
    Ok(tau as f64 * sum_products(&w0, &w1, edges) / sigma2.sqrt())
}
