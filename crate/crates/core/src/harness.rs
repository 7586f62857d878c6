//! Monte Carlo experiment runner: null-distribution studies, power tables for
//! the four detectors, and the detection / centrality pipeline for observed
//! series.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::l2_cusum_test;
use crate::error::{Error, Result};
use crate::mosaic::{mosaic_test, standardized_component, MosaicConfig, TestReport};
use crate::netgen::{make_mean, sample_series, MeanSpec, Scenario, SeriesSpec};
use crate::oracle::{phi_test, psi_test, OracleConfig};
use crate::segstats::{candidate_taus, split, EdgeSet, NetSeries};
use crate::statutil::{derive_seed, ks_distance_std_normal, mean_sd, normality_pvalue, rng_for_rep};
use crate::symmat::{eigenvector_centrality, SymMatrix};

// ---------------------------------------------------------------------------
// Detectors and grids
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Detector {
    Mosaic,
    L2cusum,
    Psi,
    Phi,
}

impl Detector {
    pub const ALL: [Detector; 4] = [Detector::Mosaic, Detector::L2cusum, Detector::Psi, Detector::Phi];

    pub fn as_str(self) -> &'static str {
        match self {
            Detector::Mosaic => "mosaic",
            Detector::L2cusum => "l2cusum",
            Detector::Psi => "psi",
            Detector::Phi => "phi",
        }
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Detector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Detector::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown detector '{s}'")))
    }
}

/// Rank structure of the simulated means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankSetting {
    /// Rank-2 null, block alternative.
    KnownRank,
    /// Rank-3 truth against the working rank.
    Misspecified,
}

impl RankSetting {
    /// Design used for a cell with change sparsity `s_star`; `0` gives the null.
    pub fn scenario(self, s_star: usize) -> Scenario {
        match (self, s_star) {
            (RankSetting::KnownRank, 0) => Scenario::NullRank2,
            (RankSetting::KnownRank, _) => Scenario::AltBlock,
            (RankSetting::Misspecified, 0) => Scenario::NullMisspecified,
            (RankSetting::Misspecified, _) => Scenario::AltMisspecified,
        }
    }
}

impl FromStr for RankSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "known-rank" => Ok(RankSetting::KnownRank),
            "misspecified" => Ok(RankSetting::Misspecified),
            _ => Err(Error::invalid(format!("unknown scenario '{s}' (expected known-rank or misspecified)"))),
        }
    }
}

impl fmt::Display for RankSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RankSetting::KnownRank => "known-rank",
            RankSetting::Misspecified => "misspecified",
        })
    }
}

/// The experiment matrix of a power study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub n: usize,
    /// Length before splitting.
    pub t_raw: usize,
    /// Last pre-change snapshot (1-based, raw scale) in alternative cells.
    pub tau_star: usize,
    pub reps: usize,
    pub rho_list: Vec<f64>,
    pub s_star_list: Vec<usize>,
    pub delta_list: Vec<f64>,
    pub scenario: RankSetting,
    /// MOSAIC settings; `cfg.seed` also fixes the designs and the replication streams.
    pub cfg: MosaicConfig,
    pub detectors: Vec<Detector>,
    /// Bootstrap size of the operator-norm CUSUM calibration.
    pub l2_cal_reps: usize,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        Self {
            n: 150,
            t_raw: 240,
            tau_star: 60,
            reps: 500,
            rho_list: vec![0.01, 0.02, 0.03],
            s_star_list: vec![0, 15, 25, 40],
            delta_list: vec![0.8, 1.0, 1.2],
            scenario: RankSetting::KnownRank,
            cfg: MosaicConfig::default(),
            detectors: vec![Detector::Mosaic, Detector::L2cusum],
            l2_cal_reps: 100,
        }
    }
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        if self.reps == 0 {
            return Err(Error::invalid("reps must be at least 1"));
        }
        if self.detectors.is_empty() {
            return Err(Error::invalid("no detectors selected"));
        }
        if self.tau_star == 0 || self.tau_star >= self.t_raw {
            return Err(Error::invalid(format!(
                "change point {} must lie in 1..{}",
                self.tau_star, self.t_raw
            )));
        }
        if self.rho_list.is_empty() || self.s_star_list.is_empty() || self.delta_list.is_empty() {
            return Err(Error::invalid("every grid list needs at least one value"));
        }
        for &rho in &self.rho_list {
            for &s in &self.s_star_list {
                for &delta in &self.delta_list {
                    make_mean(&self.mean_spec(rho, s, delta))?;
                }
            }
        }
        Ok(())
    }

    fn mean_spec(&self, rho: f64, s_star: usize, delta: f64) -> MeanSpec {
        MeanSpec { n: self.n, rho, scenario: self.scenario.scenario(s_star), s_star, delta, seed: self.cfg.seed }
    }
}

// ---------------------------------------------------------------------------
// Power tables
// ---------------------------------------------------------------------------

/// Rejection frequency of one detector in one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub rho: f64,
    pub s_star: usize,
    pub delta: f64,
    pub detector: Detector,
    pub rejections: usize,
    pub reps: usize,
}

impl PowerRow {
    pub fn power(&self) -> f64 {
        self.rejections as f64 / self.reps as f64
    }

    /// Binomial standard error `sqrt(p (1 - p) / reps)`.
    pub fn se(&self) -> f64 {
        let p = self.power();
        (p * (1.0 - p) / self.reps as f64).sqrt()
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{:.6},{}",
            self.rho,
            self.s_star,
            self.delta,
            self.detector,
            self.power(),
            self.se(),
            self.reps
        )
    }
}

pub const POWER_CSV_HEADER: &str = "rho,s_star,delta,detector,power,se,reps";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PowerTable {
    pub rows: Vec<PowerRow>,
}

impl PowerTable {
    pub fn get(&self, rho: f64, s_star: usize, delta: f64, detector: Detector) -> Option<&PowerRow> {
        self.rows
            .iter()
            .find(|r| r.rho == rho && r.s_star == s_star && r.delta == delta && r.detector == detector)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(POWER_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.csv_line());
            out.push('\n');
        }
        out
    }
}

/// Replication seed of a cell. It ignores `delta`, so null rows coincide
/// across separations.
fn cell_seed(master: u64, rho: f64, s_star: usize) -> u64 {
    derive_seed(master, &[rho.to_bits(), s_star as u64])
}

const L2_STREAM: u64 = 0x6C32;

/// Largest entry of either mean: the known sparsity handed to the oracle tests.
fn max_probability(a: &SymMatrix, b: &SymMatrix) -> f64 {
    a.max_abs_offdiag().max(b.max_abs_offdiag())
}

struct CellContext<'a> {
    grid: &'a ExperimentGrid,
    spec: SeriesSpec,
    seed: u64,
    s_star: usize,
    rho_known: f64,
}

impl CellContext<'_> {
    fn decide(&self, detector: Detector, series: &NetSeries, rep: u64) -> Result<bool> {
        let g = self.grid;
        let n = g.n;
        match detector {
            Detector::Mosaic => Ok(mosaic_test(series, &g.cfg)?.reject),
            Detector::L2cusum => {
                let taus = candidate_taus(series.len(), g.cfg.h, None)?;
                let mut rng = rng_for_rep(derive_seed(self.seed, &[L2_STREAM]), rep);
                Ok(l2_cusum_test(series, &taus, g.cfg.alpha, g.l2_cal_reps, g.cfg.k, &mut rng)?.reject)
            }
            Detector::Psi => {
                // with no change the sparsity is set to its dense extreme
                let s = if self.s_star == 0 { n } else { self.s_star };
                let cfg = self.oracle_cfg(s);
                Ok(psi_test(series, &cfg)?.reject)
            }
            Detector::Phi => {
                let p = n * (n - 1) / 2;
                let m = if self.s_star < 2 { p } else { self.s_star * (self.s_star - 1) / 2 };
                Ok(phi_test(series, &self.oracle_cfg(m))?.reject)
            }
        }
    }

    fn oracle_cfg(&self, sparsity: usize) -> OracleConfig {
        let c = &self.grid.cfg;
        OracleConfig {
            sparsity,
            rho: self.rho_known,
            k: c.k,
            h: c.h,
            alpha: c.alpha,
            c_d: c.c_d,
            ..OracleConfig::default()
        }
    }
}

/// Runs every cell of the grid. `on_row` sees each row as soon as its cell
/// completes, which lets callers flush partial tables.
pub fn run_power_table(grid: &ExperimentGrid, mut on_row: impl FnMut(&PowerRow)) -> Result<PowerTable> {
    grid.validate()?;
    let mut table = PowerTable::default();
    for &rho in &grid.rho_list {
        for &s_star in &grid.s_star_list {
            for &delta in &grid.delta_list {
                let (theta1, theta2) = make_mean(&grid.mean_spec(rho, s_star, delta))?;
                let tau_star = if s_star == 0 { grid.t_raw } else { grid.tau_star };
                let rho_known = max_probability(&theta1, &theta2);
                let ctx = CellContext {
                    grid,
                    spec: SeriesSpec { theta1, theta2, tau_star, t_len: grid.t_raw },
                    seed: cell_seed(grid.cfg.seed, rho, s_star),
                    s_star,
                    rho_known,
                };
                let outcomes: Vec<Vec<bool>> = (0..grid.reps as u64)
                    .into_par_iter()
                    .map(|rep| {
                        let series = sample_series(&ctx.spec, &mut rng_for_rep(ctx.seed, rep))?;
                        grid.detectors.iter().map(|&d| ctx.decide(d, &series, rep)).collect()
                    })
                    .collect::<Result<_>>()?;
                for (k, &detector) in grid.detectors.iter().enumerate() {
                    let row = PowerRow {
                        rho,
                        s_star,
                        delta,
                        detector,
                        rejections: outcomes.iter().filter(|o| o[k]).count(),
                        reps: grid.reps,
                    };
                    on_row(&row);
                    table.rows.push(row);
                }
            }
        }
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// Null distribution
// ---------------------------------------------------------------------------

/// Setting of a null-distribution study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullStudy {
    pub n: usize,
    pub t_raw: usize,
    pub scenario: Scenario,
}

impl Default for NullStudy {
    fn default() -> Self {
        Self { n: 150, t_raw: 240, scenario: Scenario::NullRank2 }
    }
}

/// Standardised null samples with their summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullSamples {
    pub samples: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    pub ks_distance: f64,
    pub normality_pvalue: f64,
    pub tau: usize,
    pub edges: usize,
}

impl NullSamples {
    /// One value per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for v in &self.samples {
            let _ = writeln!(out, "{v}");
        }
        out
    }
}

/// A uniformly random half of all node pairs, fixed by `seed`.
pub fn random_half(n: usize, seed: u64) -> EdgeSet {
    let mut all: Vec<(usize, usize)> = EdgeSet::all(n).iter().collect();
    all.shuffle(&mut rng_for_rep(seed, u64::MAX - 1));
    all.truncate(all.len() / 2);
    EdgeSet::from_pairs(all)
}

/// Draws `reps` null series and records `tau A_tau(S) / sigma_hat(S)` at
/// `tau = T / 2` for a fixed random half `S` of the node pairs.
pub fn run_null_distribution(cfg: &MosaicConfig, rho: f64, reps: usize, study: &NullStudy) -> Result<NullSamples> {
    cfg.validate()?;
    if reps < 100 {
        return Err(Error::invalid(format!("a null study needs at least 100 replications, got {reps}")));
    }
    if !study.scenario.is_null() {
        return Err(Error::invalid("null study needs a null scenario"));
    }
    let (theta, _) = make_mean(&MeanSpec {
        n: study.n,
        rho,
        scenario: study.scenario,
        s_star: 0,
        delta: 0.0,
        seed: cfg.seed,
    })?;
    let spec = SeriesSpec::stationary(theta, study.t_raw);
    let edges = random_half(study.n, cfg.seed);
    let stream = derive_seed(cfg.seed, &[rho.to_bits(), 0x6E75_6C6C]);
    let part_len = study.t_raw / 2;
    let tau = cfg
        .tau_override
        .as_ref()
        .and_then(|t| t.last().copied())
        .unwrap_or(part_len / 2);

    let samples: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let series = sample_series(&spec, &mut rng_for_rep(stream, rep))?;
            let sp = split(&series, 2)?;
            standardized_component(&sp, tau, cfg.k, cfg.h, &edges)
        })
        .collect::<Result<_>>()?;
    let (mean, sd) = mean_sd(&samples);
    Ok(NullSamples {
        ks_distance: ks_distance_std_normal(&samples)?,
        normality_pvalue: normality_pvalue(&samples)?,
        mean,
        sd,
        samples,
        tau,
        edges: edges.len(),
    })
}

// ---------------------------------------------------------------------------
// Observed series
// ---------------------------------------------------------------------------

/// Runs the empirical test on an observed series.
pub fn detect(series: &NetSeries, cfg: &MosaicConfig) -> Result<TestReport> {
    mosaic_test(series, cfg)
}

/// Per-snapshot eigenvector centralities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityProfile {
    /// `T` rows of `n` max-normalised scores.
    pub rows: Vec<Vec<f64>>,
    /// Snapshots without edges; their rows are all zero.
    pub empty: Vec<bool>,
}

impl CentralityProfile {
    /// Header of node ids, then one row per snapshot.
    pub fn to_csv(&self) -> String {
        let n = self.rows.first().map_or(0, Vec::len);
        let mut out = (0..n).map(|i| i.to_string()).collect::<Vec<_>>().join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    pub fn empty_snapshots(&self) -> Vec<usize> {
        self.empty.iter().enumerate().filter(|(_, &e)| e).map(|(t, _)| t).collect()
    }
}

pub fn centrality_profile(series: &NetSeries) -> Result<CentralityProfile> {
    let n = series.n();
    let mut rows = Vec::with_capacity(series.len());
    let mut empty = Vec::with_capacity(series.len());
    for t in 0..series.len() {
        if series.edges(t).is_empty() {
            rows.push(vec![0.0; n]);
            empty.push(true);
        } else {
            rows.push(eigenvector_centrality(&series.snapshot(t))?);
            empty.push(false);
        }
    }
    Ok(CentralityProfile { rows, empty })
}
