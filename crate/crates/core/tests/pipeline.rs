mod common;

use common::close;
use mosaic_core::baseline::l2_cusum_stat;
use mosaic_core::harness::{
    centrality_profile, detect, run_null_distribution, run_power_table, Detector, ExperimentGrid, NullStudy,
    RankSetting,
};
use mosaic_core::mosaic::MosaicConfig;
use mosaic_core::netgen::{make_mean, sample_series, MeanSpec, Scenario, SeriesSpec};
use mosaic_core::oracle::{psi_test, OracleConfig};
use mosaic_core::segstats::{candidate_taus, NetSeries};
use mosaic_core::statutil::rng_for_rep;
use mosaic_core::symmat::{eigh_sym, SymMatrix};
use rand::Rng;

fn sbm_snapshot(n: usize, seed: u64) -> NetSeries {
    let theta = SymMatrix::from_fn(n, |i, j| match (i == j, (i < n / 2) == (j < n / 2)) {
        (true, _) => 0.0,
        (false, true) => 0.3,
        (false, false) => 0.08,
    })
    .unwrap();
    sample_series(&SeriesSpec::stationary(theta, 1), &mut rng_for_rep(seed, 0)).unwrap()
}

/// Leading eigenvector of a nonnegative matrix by shifted power iteration.
fn power_iteration(m: &SymMatrix) -> Vec<f64> {
    let n = m.n();
    let shift = (0..n).map(|i| (0..n).map(|j| m.get(i, j)).sum::<f64>()).fold(0.0, f64::max);
    let mut v = vec![1.0; n];
    for _ in 0..100_000 {
        let mut w: Vec<f64> = (0..n).map(|i| shift * v[i] + (0..n).map(|j| m.get(i, j) * v[j]).sum::<f64>()).collect();
        let top = w.iter().copied().fold(0.0, f64::max);
        w.iter_mut().for_each(|x| *x /= top);
        let delta = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = w;
        if delta < 1e-15 {
            break;
        }
    }
    v
}

#[test]
fn centrality_matches_power_iteration() {
    for seed in 0..3 {
        let s = sbm_snapshot(60, seed);
        let got = &centrality_profile(&s).unwrap().rows[0];
        let want = power_iteration(&s.snapshot(0));
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-8, "seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn l2_statistic_matches_recomputation() {
    let (t1, t2) = make_mean(&MeanSpec { n: 40, rho: 0.1, scenario: Scenario::AltBlock, s_star: 10, delta: 1.0, seed: 2 })
        .unwrap();
    let s = sample_series(&SeriesSpec { theta1: t1, theta2: t2, tau_star: 30, t_len: 64 }, &mut rng_for_rep(2, 0)).unwrap();
    let grid = candidate_taus(64, 0.125, None).unwrap();
    let mut want = 0.0_f64;
    for &tau in grid.taus() {
        let mut d = SymMatrix::zeros(40).unwrap();
        for t in 0..64 {
            let w = if t < tau {
                1.0 / tau as f64
            } else if t >= 64 - tau {
                -1.0 / tau as f64
            } else {
                continue;
            };
            let snap = s.snapshot(t);
            for i in 0..40 {
                for j in 0..40 {
                    if i < j && snap.get(i, j) == 1.0 {
                        d.add_at(i, j, w);
                    }
                }
            }
        }
        let norm = eigh_sym(&d).unwrap().values().iter().map(|v| v.abs()).fold(0.0, f64::max);
        want = want.max((tau as f64 / 2.0).sqrt() * norm);
    }
    let got = l2_cusum_stat(&s, &grid).unwrap();
    assert!(close(got, want, 1e-10), "{got} vs {want}");
}

#[test]
fn application_threshold() {
    let s = sbm_snapshot(20, 1);
    let lists: Vec<Vec<(usize, usize)>> =
        (0..32).map(|t| if t % 2 == 0 { s.edges(0).iter().map(|&(i, j)| (i as usize, j as usize)).collect() } else { vec![] }).collect();
    let series = NetSeries::from_edge_lists(20, lists).unwrap();
    let cfg = MosaicConfig { k: 3, h: 0.1, alpha: 0.05, tau_override: Some(vec![4, 8]), ..MosaicConfig::default() };
    let r = detect(&series, &cfg).unwrap();
    assert!((r.threshold - 2.2414).abs() < 1e-3);
    assert_eq!(r.grid(), vec![4, 8]);
    assert_eq!(r.reject, r.statistic > r.threshold);
}

#[test]
fn planted_change_is_detected() {
    let (t1, t2) = make_mean(&MeanSpec { n: 150, rho: 0.02, scenario: Scenario::AltBlock, s_star: 40, delta: 1.2, seed: 0 })
        .unwrap();
    let spec = SeriesSpec { theta1: t1, theta2: t2, tau_star: 60, t_len: 240 };
    let cfg = MosaicConfig::default();
    let hits = (0..100u64)
        .filter(|&seed| detect(&sample_series(&spec, &mut rng_for_rep(seed, 0)).unwrap(), &cfg).unwrap().reject)
        .count();
    assert!(hits >= 95, "{hits} of 100");
}

#[test]
fn psi_size_and_power_at_desk_scale() {
    let (n, t_raw, reps) = (50, 90, 1000u64);
    let null = SymMatrix::from_fn(n, |i, j| if i == j { 0.0 } else { 0.05 }).unwrap();
    let spec = SeriesSpec::stationary(null, t_raw);
    let cfg = OracleConfig { sparsity: n, rho: 0.05, k: 2, h: 0.125, ..OracleConfig::default() };
    let size = (0..reps).filter(|&r| psi_test(&sample_series(&spec, &mut rng_for_rep(31, r)).unwrap(), &cfg).unwrap().reject).count();
    assert!(size as f64 / reps as f64 <= 0.10, "size {size}/{reps}");

    // the known sparsity stays at the design's 0.05 under the alternative
    let (t1, t2) = make_mean(&MeanSpec { n, rho: 0.05, scenario: Scenario::AltBlock, s_star: 20, delta: 2.0, seed: 3 }).unwrap();
    let spec = SeriesSpec { theta1: t1, theta2: t2, tau_star: t_raw / 2, t_len: t_raw };
    let cfg = OracleConfig { sparsity: 20, ..cfg };
    let power = (0..reps).filter(|&r| psi_test(&sample_series(&spec, &mut rng_for_rep(32, r)).unwrap(), &cfg).unwrap().reject).count();
    assert!(power as f64 / reps as f64 >= 0.8, "power {power}/{reps}");
}

fn small_grid() -> ExperimentGrid {
    ExperimentGrid {
        n: 30,
        t_raw: 40,
        tau_star: 10,
        reps: 20,
        rho_list: vec![0.05],
        s_star_list: vec![0, 8],
        delta_list: vec![0.8, 1.2],
        scenario: RankSetting::KnownRank,
        cfg: MosaicConfig { seed: 5, ..MosaicConfig::default() },
        detectors: vec![Detector::Mosaic, Detector::Psi, Detector::Phi],
        l2_cal_reps: 100,
    }
}

#[test]
fn power_table_replays_and_ignores_delta_without_change() {
    let g = small_grid();
    let mut seen = 0;
    let a = run_power_table(&g, |_| seen += 1).unwrap();
    let b = run_power_table(&g, |_| ()).unwrap();
    assert_eq!(seen, 12);
    assert_eq!(a.to_csv(), b.to_csv());
    for d in [Detector::Mosaic, Detector::Psi, Detector::Phi] {
        let r1 = a.get(0.05, 0, 0.8, d).unwrap();
        let r2 = a.get(0.05, 0, 1.2, d).unwrap();
        assert_eq!(r1.rejections, r2.rejections, "{d}");
    }
    for r in &a.rows {
        assert_eq!(r.power(), r.rejections as f64 / r.reps as f64);
        assert!(close(r.se(), (r.power() * (1.0 - r.power()) / 20.0).sqrt(), 1e-15));
    }
    let mut g2 = g.clone();
    g2.cfg.seed = 6;
    assert_ne!(run_power_table(&g2, |_| ()).unwrap().to_csv(), a.to_csv());
}

#[test]
fn power_table_misspecified_and_bootstrap() {
    let g = ExperimentGrid {
        scenario: RankSetting::Misspecified,
        s_star_list: vec![8],
        delta_list: vec![1.0],
        reps: 4,
        detectors: vec![Detector::L2cusum, Detector::Mosaic],
        ..small_grid()
    };
    let t = run_power_table(&g, |_| ()).unwrap();
    assert_eq!(t.rows.len(), 2);
    assert_eq!(t.rows[0].detector, Detector::L2cusum);
    assert_eq!(t, run_power_table(&g, |_| ()).unwrap());
}

#[test]
fn null_study_length_and_replay() {
    let cfg = MosaicConfig { seed: 9, ..MosaicConfig::default() };
    let study = NullStudy { n: 30, t_raw: 40, scenario: Scenario::NullRank2 };
    let a = run_null_distribution(&cfg, 0.1, 100, &study).unwrap();
    let b = run_null_distribution(&cfg, 0.1, 100, &study).unwrap();
    assert_eq!(a.samples.len(), 100);
    assert_eq!(a.samples, b.samples);
    assert_eq!(a.tau, 10);
    assert_eq!(a.edges, 30 * 29 / 4);
    assert!(a.samples.iter().all(|v| v.is_finite()));
    assert!(run_null_distribution(&cfg, 0.1, 99, &study).is_err());
    let alt = NullStudy { scenario: Scenario::AltBlock, ..study };
    assert!(run_null_distribution(&cfg, 0.1, 100, &alt).is_err());
}

#[test]
fn sampled_series_survive_file_round_trip() {
    let mut rng = rng_for_rep(77, 0);
    for _ in 0..5 {
        let n = rng.gen_range(2..40);
        let s = sbm_snapshot(n.max(4), rng.gen());
        let text = mosaic_core::io::series_to_string(&s);
        assert_eq!(mosaic_core::io::read_series(text.as_bytes()).unwrap(), s);
    }
}
