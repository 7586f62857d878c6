//! Mean-matrix designs for the simulation studies and Bernoulli sampling of
//! dynamic network series.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segstats::NetSeries;
use crate::statutil::rng_for_rep;
use crate::symmat::SymMatrix;

/// Simulation design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// `rho 11' + (rho/2) uu'`, no change.
    NullRank2,
    /// The rank-2 null plus a small rank-one term on the complement of `u`.
    NullMisspecified,
    /// `rho 11'` switching to `rho 11' + delta sqrt(rho/s) vv'`.
    AltBlock,
    /// The block alternative with an extra rank-one term in the post-change mean.
    AltMisspecified,
}

impl Scenario {
    pub const ALL: [Scenario; 4] =
        [Scenario::NullRank2, Scenario::NullMisspecified, Scenario::AltBlock, Scenario::AltMisspecified];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::NullRank2 => "null-rank2",
            Scenario::NullMisspecified => "null-misspecified",
            Scenario::AltBlock => "alt-block",
            Scenario::AltMisspecified => "alt-misspecified",
        }
    }

    pub fn is_null(self) -> bool {
        matches!(self, Scenario::NullRank2 | Scenario::NullMisspecified)
    }

    /// Null design with the same rank structure (used for size rows).
    pub fn null_counterpart(self) -> Scenario {
        match self {
            Scenario::NullRank2 | Scenario::AltBlock => Scenario::NullRank2,
            Scenario::NullMisspecified | Scenario::AltMisspecified => Scenario::NullMisspecified,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown scenario '{s}'")))
    }
}

/// Inputs to [`make_mean`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanSpec {
    pub n: usize,
    pub rho: f64,
    pub scenario: Scenario,
    /// Change sparsity; `0` means no change. Ignored by null scenarios.
    pub s_star: usize,
    /// Separation; ignored by null scenarios and when `s_star == 0`.
    pub delta: f64,
    /// Seed for the support vectors and Rademacher signs. The design is fixed
    /// for a given seed and shared across Monte Carlo replications.
    pub seed: u64,
}

impl MeanSpec {
    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid(format!("n must be at least 2, got {}", self.n)));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::invalid(format!("rho must lie in (0, 1], got {}", self.rho)));
        }
        if !self.scenario.is_null() {
            if self.s_star > self.n {
                return Err(Error::invalid(format!("s* = {} exceeds n = {}", self.s_star, self.n)));
            }
            if !(self.delta.is_finite() && self.delta >= 0.0) {
                return Err(Error::invalid(format!("delta must be finite and nonnegative, got {}", self.delta)));
            }
        }
        Ok(())
    }
}

/// Random 0/1 vector with exactly `weight` ones.
fn support_vector<R: Rng + ?Sized>(n: usize, weight: usize, rng: &mut R) -> Vec<f64> {
    let mut u = vec![0.0; n];
    for i in sample_indices(rng, n, weight) {
        u[i] = 1.0;
    }
    u
}

/// `((1 - u_i) v_i)` with `v_i` Rademacher.
fn signed_complement<R: Rng + ?Sized>(u: &[f64], rng: &mut R) -> Vec<f64> {
    u.iter()
        .map(|&ui| {
            let v = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            (1.0 - ui) * v
        })
        .collect()
}

fn check_probabilities(m: &SymMatrix, what: &str) -> Result<()> {
    let n = m.n();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = m.get(i, j);
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!(
                    "{what} entry ({i}, {j}) = {v} is not a probability"
                )));
            }
        }
    }
    Ok(())
}

/// Pre- and post-change mean matrices of the requested design.
pub fn make_mean(spec: &MeanSpec) -> Result<(SymMatrix, SymMatrix)> {
    spec.validate()?;
    let n = spec.n;
    let rho = spec.rho;
    // a dedicated stream keeps the design independent of the replication streams
    let mut rng = rng_for_rep(spec.seed, u64::MAX);

    let (theta1, theta2) = match spec.scenario {
        Scenario::NullRank2 | Scenario::NullMisspecified => {
            let u = support_vector(n, n / 2, &mut rng);
            let uc = if spec.scenario == Scenario::NullMisspecified {
                Some(signed_complement(&u, &mut rng))
            } else {
                None
            };
            let theta = SymMatrix::from_fn(n, |i, j| {
                let mut v = rho + 0.5 * rho * u[i] * u[j];
                if let Some(uc) = &uc {
                    v += 0.05 * rho * uc[i] * uc[j];
                }
                v
            })?;
            (theta.clone(), theta)
        }
        Scenario::AltBlock | Scenario::AltMisspecified => {
            let theta1 = SymMatrix::from_fn(n, |_, _| rho)?;
            if spec.s_star == 0 {
                (theta1.clone(), theta1)
            } else {
                let s = spec.s_star;
                let v = support_vector(n, s, &mut rng);
                let vc = if spec.scenario == Scenario::AltMisspecified {
                    Some(signed_complement(&v, &mut rng))
                } else {
                    None
                };
                let jump = spec.delta * (rho / s as f64).sqrt();
                let theta2 = SymMatrix::from_fn(n, |i, j| {
                    let mut x = rho + jump * v[i] * v[j];
                    if let Some(vc) = &vc {
                        x += 0.1 * rho * vc[i] * vc[j];
                    }
                    x
                })?;
                (theta1, theta2)
            }
        }
    };
    let (mut theta1, mut theta2) = (theta1, theta2);
    theta1.zero_diagonal();
    theta2.zero_diagonal();
    check_probabilities(&theta1, "pre-change mean")?;
    check_probabilities(&theta2, "post-change mean")?;
    Ok((theta1, theta2))
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Mean structure and length of a series to sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSpec {
    pub theta1: SymMatrix,
    pub theta2: SymMatrix,
    /// Snapshots `1..=tau_star` (1-based) use `theta1`, the rest `theta2`.
    /// `tau_star == t_len` means no change.
    pub tau_star: usize,
    /// Length before any splitting.
    pub t_len: usize,
}

impl SeriesSpec {
    /// A change-free series of length `t_len` with mean `theta`.
    pub fn stationary(theta: SymMatrix, t_len: usize) -> Self {
        Self { theta1: theta.clone(), theta2: theta, tau_star: t_len, t_len }
    }

    fn validate(&self) -> Result<()> {
        if self.t_len == 0 {
            return Err(Error::invalid("series length must be positive"));
        }
        if self.tau_star == 0 || self.tau_star > self.t_len {
            return Err(Error::invalid(format!(
                "change point {} outside 1..={}",
                self.tau_star, self.t_len
            )));
        }
        if self.theta1.n() != self.theta2.n() {
            return Err(Error::invalid("mean matrices differ in dimension"));
        }
        for (m, what) in [(&self.theta1, "pre-change mean"), (&self.theta2, "post-change mean")] {
            check_probabilities(m, what)?;
            if (0..m.n()).any(|i| m.get(i, i) != 0.0) {
                return Err(Error::invalid(format!("{what} has a nonzero diagonal")));
            }
        }
        Ok(())
    }
}

/// Below this tier rate, pairs are drawn by thinning a geometric-skip process
/// instead of one uniform per pair.
const SPARSE_CUTOFF: f64 = 0.25;

/// Probabilities within a factor `2^TIERS` of the maximum get their own
/// dyadic tier; smaller ones share the last.
const TIERS: usize = 16;

/// Pairs whose probabilities lie within a factor of two of each other (the
/// last tier excepted), in row-major pair order.
struct Tier {
    index: Vec<u32>,
    probs: Vec<f64>,
    rate: f64,
}

impl Tier {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<u32>) {
        let len = self.probs.len();
        if self.rate > SPARSE_CUTOFF {
            for (&k, &q) in self.index.iter().zip(&self.probs) {
                if rng.gen::<f64>() < q {
                    out.push(k);
                }
            }
            return;
        }
        // Candidates arrive as a Bernoulli(rate) process; each is kept with
        // probability q / rate, giving Bernoulli(q) per pair.
        let log_miss = (-self.rate).ln_1p();
        let mut idx = 0usize;
        loop {
            let u: f64 = 1.0 - rng.gen::<f64>(); // in (0, 1]
            let skip = (u.ln() / log_miss).floor();
            if skip >= (len - idx) as f64 {
                break;
            }
            idx += skip as usize;
            let q = self.probs[idx];
            if q >= self.rate || rng.gen::<f64>() * self.rate < q {
                out.push(self.index[idx]);
            }
            idx += 1;
            if idx >= len {
                break;
            }
        }
    }
}

/// Upper-triangle probabilities of one mean matrix, grouped into tiers.
struct PairProbs {
    pairs: Vec<(u32, u32)>,
    tiers: Vec<Tier>,
    expected: f64,
}

impl PairProbs {
    fn new(theta: &SymMatrix) -> Self {
        let n = theta.n();
        let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                pairs.push((i as u32, j as u32));
            }
        }
        let max = pairs.iter().map(|&(i, j)| theta.get(i as usize, j as usize)).fold(0.0, f64::max);
        let mut tiers: Vec<Tier> = (0..TIERS)
            .map(|b| Tier { index: Vec::new(), probs: Vec::new(), rate: max * 0.5f64.powi(b as i32) })
            .collect();
        let mut expected = 0.0;
        for (k, &(i, j)) in pairs.iter().enumerate() {
            let q = theta.get(i as usize, j as usize);
            if q <= 0.0 {
                continue;
            }
            expected += q;
            let b = ((max / q).log2().floor().max(0.0) as usize).min(TIERS - 1);
            // guard against rounding in log2 at tier edges
            let b = if q > tiers[b].rate { b.saturating_sub(1) } else { b };
            tiers[b].index.push(k as u32);
            tiers[b].probs.push(q);
        }
        tiers.retain(|t| !t.index.is_empty());
        for t in &mut tiers {
            t.rate = t.probs.iter().copied().fold(0.0, f64::max);
        }
        Self { pairs, tiers, expected }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<(u32, u32)> {
        let mut idx = Vec::with_capacity((self.expected * 1.2) as usize + 8);
        for tier in &self.tiers {
            tier.draw(rng, &mut idx);
        }
        if self.tiers.len() > 1 {
            idx.sort_unstable();
        }
        idx.into_iter().map(|k| self.pairs[k as usize]).collect()
    }
}

/// Draws a series with independent Bernoulli upper-triangle entries.
pub fn sample_series<R: Rng + ?Sized>(spec: &SeriesSpec, rng: &mut R) -> Result<NetSeries> {
    spec.validate()?;
    let n = spec.theta1.n();
    let before = PairProbs::new(&spec.theta1);
    let after = if spec.tau_star < spec.t_len { Some(PairProbs::new(&spec.theta2)) } else { None };
    let snapshots = (0..spec.t_len)
        .map(|t| {
            let src = if t < spec.tau_star { &before } else { after.as_ref().expect("change present") };
            src.draw(rng)
        })
        .collect();
    Ok(NetSeries::from_sorted_unchecked(n, snapshots))
}
