//! Operator-norm CUSUM competitor with parametric-bootstrap calibration.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgen::{sample_series, SeriesSpec};
use crate::segstats::{segment_means, NetSeries, TauGrid};
use crate::symmat::{ed_truncate, spectral_norm, SymMatrix};

/// `max over tau of || sqrt(tau / 2) (left mean - right mean) ||_2`.
pub fn l2_cusum_stat(series: &NetSeries, taus: &TauGrid) -> Result<f64> {
    let mut best = 0.0_f64;
    for &tau in taus.taus() {
        let (left, right) = segment_means(series, tau)?;
        let d = left.sub(&right)?;
        best = best.max((tau as f64 / 2.0).sqrt() * spectral_norm(&d)?);
    }
    Ok(best)
}

/// Outcome of [`l2_cusum_test`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2Decision {
    pub statistic: f64,
    /// Empirical `1 - alpha` quantile of the bootstrap statistics.
    pub critical: f64,
    pub reject: bool,
    /// The estimated null mean was identically zero; the test accepts.
    pub degenerate: bool,
}

/// Order-statistic quantile: the `ceil(q R)`-th smallest value.
pub fn empirical_quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let idx = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    v[idx]
}

/// Rank-`k` estimate of a stationary mean, clipped to valid probabilities.
pub fn null_mean_estimate(series: &NetSeries, k: usize) -> Result<SymMatrix> {
    let mean = series.mean_over(0..series.len());
    let mut theta = ed_truncate(&mean, k)?;
    let n = theta.n();
    for i in 0..n {
        for j in (i + 1)..n {
            theta.set(i, j, theta.get(i, j).clamp(0.0, 1.0));
        }
    }
    theta.zero_diagonal();
    Ok(theta)
}

/// Rejects when the statistic exceeds the `1 - alpha` quantile of
/// `cal_reps` statistics simulated from the rank-`k` null fit.
pub fn l2_cusum_test<R: Rng + ?Sized>(
    series: &NetSeries,
    taus: &TauGrid,
    alpha: f64,
    cal_reps: usize,
    k: usize,
    rng: &mut R,
) -> Result<L2Decision> {
    if cal_reps < 100 {
        return Err(Error::invalid(format!("calibration needs at least 100 replications, got {cal_reps}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let statistic = l2_cusum_stat(series, taus)?;
    let theta = null_mean_estimate(series, k)?;
    if theta.max_abs() == 0.0 {
        return Ok(L2Decision { statistic, critical: f64::INFINITY, reject: false, degenerate: true });
    }
    let spec = SeriesSpec::stationary(theta, series.len());
    let mut null_stats = Vec::with_capacity(cal_reps);
    for _ in 0..cal_reps {
        let s = sample_series(&spec, rng)?;
        null_stats.push(l2_cusum_stat(&s, taus)?);
    }
    let critical = empirical_quantile(&null_stats, 1.0 - alpha);
    Ok(L2Decision { statistic, critical, reject: statistic > critical, degenerate: false })
}
