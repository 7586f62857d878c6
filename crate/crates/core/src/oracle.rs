//! Oracle tests that assume the change sparsity and network sparsity are
//! known: the spectral test `psi` (screened products of smoothed CUSUMs) and
//! the low-rank-free test `phi` (screened products of raw CUSUMs). Both use a
//! threefold split, screening on the third part.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mosaic::{sum_products, sum_products_all};
use crate::segstats::{candidate_taus, e_matrix, split, z_matrix, EdgeSet, NetSeries};
use crate::symmat::SymMatrix;

/// Where `d(s*)^2` sits inside its admissible interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DChoice {
    #[default]
    Lower,
    Midpoint,
    Upper,
}

/// Known-parameter configuration shared by [`psi_test`] and [`phi_test`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// `s*` for `psi` (count of nodes touched by the change), `m*` for `phi`
    /// (count of changed pairs).
    pub sparsity: usize,
    pub rho: f64,
    /// Working rank (`psi` only).
    pub k: usize,
    pub h: f64,
    /// Level (`phi` only).
    pub alpha: f64,
    /// Screening constant (`psi` only).
    pub c_d: f64,
    pub d_choice: DChoice,
    pub tau_override: Option<Vec<usize>>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            sparsity: 1,
            rho: 0.05,
            k: 2,
            h: 0.125,
            alpha: 0.05,
            c_d: 1.0,
            d_choice: DChoice::Lower,
            tau_override: None,
        }
    }
}

impl OracleConfig {
    fn validate(&self) -> Result<()> {
        if self.sparsity == 0 {
            return Err(Error::invalid("known sparsity must be at least 1"));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::invalid(format!("rho must lie in (0, 1], got {}", self.rho)));
        }
        if !(self.h > 0.0 && self.h < 0.5) {
            return Err(Error::invalid(format!("bandwidth h must lie in (0, 0.5), got {}", self.h)));
        }
        Ok(())
    }
}

/// Decision and components of an oracle test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    /// Compared against `threshold`.
    pub statistic: f64,
    pub threshold: f64,
    pub reject: bool,
    /// Screening cut on the third part.
    pub screen_cut: f64,
    /// Signed maximum over the grid of the screened product sums.
    pub a_screened: f64,
    /// Signed maximum over the grid of the full-set product sums (`psi` only).
    pub a_omega: Option<f64>,
    /// Screened-set size at each window.
    pub screened_edges: Vec<usize>,
    pub taus: Vec<usize>,
}

/// `sum over i < j in edges of z1_ij * z2_ij`.
pub fn product_stat(z1: &SymMatrix, z2: &SymMatrix, edges: &EdgeSet) -> Result<f64> {
    if z1.n() != z2.n() {
        return Err(Error::invalid(format!("dimension mismatch: {} vs {}", z1.n(), z2.n())));
    }
    if edges.max_node().is_some_and(|m| m >= z1.n()) {
        return Err(Error::invalid("edge set refers to nodes outside the matrices"));
    }
    Ok(sum_products(z1, z2, edges))
}

fn screen(z: &SymMatrix, cut: f64) -> EdgeSet {
    let n = z.n();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if z.get(i, j).abs() >= cut {
                pairs.push((i, j));
            }
        }
    }
    EdgeSet::from_pairs(pairs)
}

// ---------------------------------------------------------------------------
// psi
// ---------------------------------------------------------------------------

/// Admissible interval for `d(s*)^2`:
/// `[c_d^2 log(e n / s*) / n, c_d^2 log(e n / s*) / s*]`.
pub fn psi_d2_interval(n: usize, s_star: usize, c_d: f64) -> (f64, f64) {
    let l = (std::f64::consts::E * n as f64 / s_star as f64).ln() * c_d * c_d;
    (l / n as f64, l / s_star as f64)
}

/// Screening cut `d(s*)`; the midpoint is taken on the squared scale.
pub fn psi_screen_cut(n: usize, s_star: usize, c_d: f64, choice: DChoice) -> f64 {
    let (lo, hi) = psi_d2_interval(n, s_star, c_d);
    let d2 = match choice {
        DChoice::Lower => lo,
        DChoice::Upper => hi,
        DChoice::Midpoint => 0.5 * (lo + hi),
    };
    d2.sqrt()
}

/// `r_n / s* = log(e n)`.
pub fn psi_threshold(n: usize) -> f64 {
    (std::f64::consts::E * n as f64).ln()
}

/// Rejects when `max(|A_S| / s*, |A_Omega| / n) > log(e n)`.
pub fn psi_test(series: &NetSeries, cfg: &OracleConfig) -> Result<OracleReport> {
    cfg.validate()?;
    let n = series.n();
    let s_star = cfg.sparsity;
    if s_star > n {
        return Err(Error::invalid(format!("s* = {s_star} exceeds n = {n}")));
    }
    if cfg.k == 0 {
        return Err(Error::invalid("working rank K must be at least 1"));
    }
    let sp = split(series, 3)?;
    let grid = candidate_taus(sp.part_len(), cfg.h, cfg.tau_override.as_deref())?;
    let cut = psi_screen_cut(n, s_star, cfg.c_d, cfg.d_choice);

    let mut a_s = f64::NEG_INFINITY;
    let mut a_o = f64::NEG_INFINITY;
    let mut sizes = Vec::with_capacity(grid.len());
    for &tau in grid.taus() {
        let z0 = z_matrix(sp.part(0), tau, cfg.rho, cfg.k)?;
        let z1 = z_matrix(sp.part(1), tau, cfg.rho, cfg.k)?;
        let z2 = z_matrix(sp.part(2), tau, cfg.rho, cfg.k)?;
        let s = screen(&z2, cut);
        sizes.push(s.len());
        a_s = a_s.max(sum_products(&z0, &z1, &s));
        a_o = a_o.max(sum_products_all(&z0, &z1));
    }
    let statistic = (a_s.abs() / s_star as f64).max(a_o.abs() / n as f64);
    let threshold = psi_threshold(n);
    Ok(OracleReport {
        statistic,
        threshold,
        reject: statistic > threshold,
        screen_cut: cut,
        a_screened: a_s,
        a_omega: Some(a_o),
        screened_edges: sizes,
        taus: grid.taus().to_vec(),
    })
}

// ---------------------------------------------------------------------------
// phi
// ---------------------------------------------------------------------------

/// `c_alpha = sqrt(2 / alpha * log2(1 / (2h)))`.
pub fn c_alpha(alpha: f64, h: f64) -> f64 {
    (2.0 / alpha * (1.0 / (2.0 * h)).log2()).sqrt()
}

/// Screening cut and rejection threshold of `phi` for `m*` changed pairs
/// among `p = n (n - 1) / 2`.
pub fn phi_cut_and_threshold(n: usize, m_star: usize, alpha: f64, h: f64) -> (f64, f64) {
    let p = (n * (n - 1) / 2) as f64;
    let m = m_star as f64;
    let ca = c_alpha(alpha, h);
    if m >= p.sqrt() {
        (0.0, ca * p.sqrt())
    } else {
        let l = (std::f64::consts::E * p / (m * m)).ln();
        ((3.0 * l).sqrt(), 3.0 * ca * m * l)
    }
}

/// Rejects when `max over tau of B_tau(S) > r_n`.
pub fn phi_test(series: &NetSeries, cfg: &OracleConfig) -> Result<OracleReport> {
    cfg.validate()?;
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", cfg.alpha)));
    }
    let n = series.n();
    let p = n * (n - 1) / 2;
    if cfg.sparsity > p {
        return Err(Error::invalid(format!("m* = {} exceeds the {p} node pairs", cfg.sparsity)));
    }
    let sp = split(series, 3)?;
    let grid = candidate_taus(sp.part_len(), cfg.h, cfg.tau_override.as_deref())?;
    let (cut, threshold) = phi_cut_and_threshold(n, cfg.sparsity, cfg.alpha, cfg.h);

    let mut b = f64::NEG_INFINITY;
    let mut sizes = Vec::with_capacity(grid.len());
    for &tau in grid.taus() {
        let e0 = e_matrix(sp.part(0), tau, cfg.rho)?;
        let e1 = e_matrix(sp.part(1), tau, cfg.rho)?;
        let value = if cut == 0.0 {
            sizes.push(p);
            sum_products_all(&e0, &e1)
        } else {
            let e2 = e_matrix(sp.part(2), tau, cfg.rho)?;
            let s = screen(&e2, cut);
            sizes.push(s.len());
            sum_products(&e0, &e1, &s)
        };
        b = b.max(value);
    }
    Ok(OracleReport {
        statistic: b,
        threshold,
        reject: b > threshold,
        screen_cut: cut,
        a_screened: b,
        a_omega: None,
        screened_edges: sizes,
        taus: grid.taus().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statutil::rng_for_rep;
    use rand::Rng;

    #[test]
    fn psi_threshold_at_150() {
        assert!((psi_threshold(150) - 6.0106).abs() < 1e-3);
    }

    #[test]
    fn c_alpha_reference() {
        assert!((c_alpha(0.05, 0.25) - 40f64.sqrt()).abs() < 1e-12);
        assert!((c_alpha(0.05, 0.25) - 6.3246).abs() < 1e-4);
    }

    #[test]
    fn d_interval_ordering() {
        for n in [10, 50, 150] {
            for s in 1..=n {
                let lo = psi_screen_cut(n, s, 1.0, DChoice::Lower);
                let mid = psi_screen_cut(n, s, 1.0, DChoice::Midpoint);
                let hi = psi_screen_cut(n, s, 1.0, DChoice::Upper);
                assert!(lo <= mid + 1e-15 && mid <= hi + 1e-15, "{n} {s}");
            }
        }
    }

    #[test]
    fn product_stat_basics() {
        let a = SymMatrix::from_fn(4, |i, j| (i + 2 * j) as f64).unwrap();
        let b = SymMatrix::from_fn(4, |i, j| (i * j) as f64 - 1.0).unwrap();
        assert_eq!(product_stat(&a, &b, &EdgeSet::empty()).unwrap(), 0.0);
        let s = EdgeSet::from_pairs([(0, 1), (2, 3)]);
        assert_eq!(product_stat(&a, &b, &s).unwrap(), -2.0 + 8.0 * 5.0);
        assert!(product_stat(&a, &SymMatrix::zeros(3).unwrap(), &s).is_err());
    }

    #[test]
    fn product_stat_matches_double_loop() {
        let mut rng = rng_for_rep(4, 4);
        let a = SymMatrix::from_fn(20, |_, _| rng.gen::<f64>() - 0.5).unwrap();
        let b = SymMatrix::from_fn(20, |_, _| rng.gen::<f64>() - 0.5).unwrap();
        let s = EdgeSet::from_pairs((0..60).map(|_| (rng.gen_range(0..20), rng.gen_range(0..20))));
        let mut direct = 0.0;
        for i in 0..20 {
            for j in (i + 1)..20 {
                if s.contains(i, j) {
                    direct += a.get(i, j) * b.get(i, j);
                }
            }
        }
        assert_eq!(product_stat(&a, &b, &s).unwrap(), direct);
        assert_eq!(product_stat(&a, &b, &EdgeSet::all(20)).unwrap(), sum_products_all(&a, &b));
    }

    #[test]
    fn dense_regime_disables_screening() {
        let (cut, r) = phi_cut_and_threshold(3, 3, 0.3, 1.0 / 6.0);
        assert_eq!(cut, 0.0);
        assert!((r - 5.630).abs() < 1e-3, "{r}");
        let (cut, _) = phi_cut_and_threshold(150, 5, 0.05, 0.25);
        assert!(cut > 0.0);
    }

    fn constant_series(n: usize, t: usize) -> NetSeries {
        NetSeries::from_edge_lists(n, vec![vec![(0, 1), (1, 2)]; t]).unwrap()
    }

    #[test]
    fn noiseless_no_change_accepts() {
        let s = constant_series(6, 24);
        let cfg = OracleConfig { sparsity: 3, rho: 0.5, k: 6, h: 0.25, ..OracleConfig::default() };
        let r = psi_test(&s, &cfg).unwrap();
        assert!(r.a_screened.abs() < 1e-9 && r.a_omega.unwrap().abs() < 1e-9);
        assert!(!r.reject);
        let r = phi_test(&s, &cfg).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(!r.reject);
    }

    #[test]
    fn noiseless_strong_change_rejects() {
        // the clique on nodes 0..4 appears halfway through
        let n = 10;
        let clique: Vec<(usize, usize)> =
            (0..4).flat_map(|i| ((i + 1)..4).map(move |j| (i, j))).collect();
        let mut lists = vec![vec![]; 96];
        for l in lists.iter_mut().skip(48) {
            *l = clique.clone();
        }
        let s = NetSeries::from_edge_lists(n, lists).unwrap();
        let cfg = OracleConfig { sparsity: 4, rho: 0.1, k: n, h: 0.25, ..OracleConfig::default() };
        let r = psi_test(&s, &cfg).unwrap();
        // tau = 16: z = sqrt(16 / 0.2) on 6 pairs, A_S = 6 * 80 = 480
        assert!((r.a_screened - 480.0).abs() < 1e-8, "{}", r.a_screened);
        assert!(r.reject);
        assert_eq!(*r.screened_edges.last().unwrap(), 6);
    }

    #[test]
    fn invalid_inputs() {
        let s = constant_series(6, 24);
        let cfg = OracleConfig { sparsity: 7, ..OracleConfig::default() };
        assert!(psi_test(&s, &cfg).is_err());
        let cfg = OracleConfig { sparsity: 16, ..OracleConfig::default() };
        assert!(phi_test(&s, &cfg).is_err());
        let cfg = OracleConfig { sparsity: 0, ..OracleConfig::default() };
        assert!(phi_test(&s, &cfg).is_err());
        assert!(psi_test(&constant_series(6, 5), &OracleConfig::default()).is_err());
    }
}
