//! `mosaic` command-line driver.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use mosaic_core::harness::{
    centrality_profile, detect, run_null_distribution, run_power_table, Detector, ExperimentGrid, NullStudy,
    RankSetting, POWER_CSV_HEADER,
};
use mosaic_core::io::parse_series;
use mosaic_core::mosaic::MosaicConfig;
use mosaic_core::Error;

const FORMAT_HELP: &str = "Series files are plain text: a header line 'n T' followed by lines 't i j', \
each marking an undirected edge between nodes i and j at time t. All indices are 0-based; \
absent pairs are non-edges.";

#[derive(Parser, Debug)]
#[command(name = "mosaic", version, about = "Change-point tests for dynamic networks", after_help = FORMAT_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Test an observed series for a change in its mean structure; writes a JSON report.
    Detect(DetectArgs),
    /// Simulate standardised null statistics; writes one value per line.
    SimulateNull(NullArgs),
    /// Monte Carlo rejection frequencies over a design grid; writes CSV.
    PowerTable(PowerArgs),
    /// Eigenvector centrality of every snapshot; writes a T x n CSV.
    Centrality(CentralityArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
struct TestArgs {
    /// Working rank K of the mean estimator.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Bandwidth h; the window grid starts at round(h T) on the split scale.
    #[arg(long, default_value_t = 0.25)]
    h: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Screening constant c_d.
    #[arg(long = "cd", default_value_t = 1.0)]
    c_d: f64,
    /// Comma-separated window lengths on the split scale, e.g. "4,8".
    #[arg(long)]
    taus: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl TestArgs {
    fn config(&self) -> Result<MosaicConfig, Error> {
        let tau_override = self.taus.as_deref().map(parse_list::<usize>).transpose()?;
        let cfg = MosaicConfig { k: self.k, h: self.h, alpha: self.alpha, c_d: self.c_d, tau_override, seed: self.seed };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct DetectArgs {
    /// Series file (see the format notes below).
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    test: TestArgs,
    /// Report path; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct NullArgs {
    #[arg(long, default_value_t = 150)]
    n: usize,
    /// Series length before the twofold split.
    #[arg(long = "t-raw", default_value_t = 240)]
    t_raw: usize,
    #[arg(long, default_value_t = 2000)]
    reps: usize,
    #[arg(long, default_value_t = 0.015)]
    rho: f64,
    /// known-rank or misspecified.
    #[arg(long, default_value = "known-rank")]
    scenario: String,
    #[command(flatten)]
    test: TestArgs,
    /// Sample file; a `.json` summary with the resolved configuration is written next to it.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct PowerArgs {
    #[arg(long, default_value_t = 150)]
    n: usize,
    #[arg(long = "t-raw", default_value_t = 240)]
    t_raw: usize,
    /// Last pre-change snapshot on the raw scale.
    #[arg(long = "tau-star", default_value_t = 60)]
    tau_star: usize,
    #[arg(long, default_value_t = 500)]
    reps: usize,
    /// Comma-separated list.
    #[arg(long, default_value = "0.01,0.02,0.03")]
    rho: String,
    /// Comma-separated list; 0 gives the null design.
    #[arg(long = "s-star", default_value = "0,15,25,40")]
    s_star: String,
    /// Comma-separated list.
    #[arg(long, default_value = "0.8,1.0,1.2")]
    delta: String,
    /// known-rank or misspecified.
    #[arg(long, default_value = "known-rank")]
    scenario: String,
    /// Comma-separated subset of mosaic, l2cusum, psi, phi.
    #[arg(long, default_value = "mosaic,l2cusum")]
    detectors: String,
    /// Bootstrap size of the l2cusum calibration.
    #[arg(long = "cal-reps", default_value_t = 100)]
    cal_reps: usize,
    #[command(flatten)]
    test: TestArgs,
    /// CSV path; a `.json` file with the resolved configuration is written next to it.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct CentralityArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, Error> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|_| Error::InvalidInput(format!("cannot parse '{t}' in list '{s}'"))))
        .collect()
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidInput(_) => 2,
        Error::Parse { .. } | Error::Io(_) | Error::Degenerate(_) => 3,
        Error::NoConvergence { .. } => 4,
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn write_json(path: Option<&Path>, value: &Value) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(io::Error::other(e)))? + "\n";
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serialisable")
}

fn run_detect(a: &DetectArgs) -> Result<(), Error> {
    let cfg = a.test.config()?;
    let series = parse_series(&a.input)?;
    eprintln!("detect: n = {}, T = {}, {} edges", series.n(), series.len(), series.total_edges());
    let report = detect(&series, &cfg)?;
    let mut doc = to_value(&report);
    doc["config"] = json!({
        "command": "detect",
        "input": a.input.display().to_string(),
        "n": series.n(),
        "t_raw": series.len(),
        "mosaic": to_value(&cfg),
        "grid": report.grid(),
    });
    write_json(a.output.as_deref(), &doc)?;
    eprintln!(
        "statistic {:.4} vs threshold {:.4}: {}",
        report.statistic,
        report.threshold,
        if report.reject { "reject" } else { "accept" }
    );
    Ok(())
}

fn run_null(a: &NullArgs) -> Result<(), Error> {
    let cfg = a.test.config()?;
    let setting: RankSetting = a.scenario.parse()?;
    let study = NullStudy { n: a.n, t_raw: a.t_raw, scenario: setting.scenario(0) };
    let out = run_null_distribution(&cfg, a.rho, a.reps, &study)?;
    std::fs::write(&a.output, out.to_csv())?;
    let summary = json!({
        "config": {
            "command": "simulate-null",
            "n": a.n,
            "t_raw": a.t_raw,
            "reps": a.reps,
            "rho": a.rho,
            "scenario": setting.to_string(),
            "mosaic": to_value(&cfg),
        },
        "tau": out.tau,
        "edges": out.edges,
        "mean": out.mean,
        "sd": out.sd,
        "ks_distance": out.ks_distance,
        "normality_pvalue": out.normality_pvalue,
    });
    write_json(Some(&sidecar(&a.output)), &summary)?;
    eprintln!(
        "mean {:.4}, sd {:.4}, KS {:.4}, normality p {:.4}",
        out.mean, out.sd, out.ks_distance, out.normality_pvalue
    );
    Ok(())
}

fn run_power(a: &PowerArgs) -> Result<(), Error> {
    let grid = ExperimentGrid {
        n: a.n,
        t_raw: a.t_raw,
        tau_star: a.tau_star,
        reps: a.reps,
        rho_list: parse_list(&a.rho)?,
        s_star_list: parse_list(&a.s_star)?,
        delta_list: parse_list(&a.delta)?,
        scenario: a.scenario.parse()?,
        cfg: a.test.config()?,
        detectors: parse_list::<Detector>(&a.detectors)?,
        l2_cal_reps: a.cal_reps,
    };
    grid.validate()?;
    write_json(Some(&sidecar(&a.output)), &json!({ "config": to_value(&grid), "command": "power-table" }))?;

    let mut out = BufWriter::new(File::create(&a.output)?);
    writeln!(out, "{POWER_CSV_HEADER}")?;
    out.flush()?;
    let mut write_err: Option<io::Error> = None;
    run_power_table(&grid, |row| {
        eprintln!("{}", row.csv_line());
        if write_err.is_none() {
            if let Err(e) = writeln!(out, "{}", row.csv_line()).and_then(|_| out.flush()) {
                write_err = Some(e);
            }
        }
    })?;
    match write_err {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn run_centrality(a: &CentralityArgs) -> Result<(), Error> {
    let series = parse_series(&a.input)?;
    let profile = centrality_profile(&series)?;
    for t in profile.empty_snapshots() {
        eprintln!("warning: snapshot {t} has no edges; its row is all zero");
    }
    std::fs::write(&a.output, profile.to_csv())?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Detect(a) => run_detect(a),
        Command::SimulateNull(a) => run_null(a),
        Command::PowerTable(a) => run_power(a),
        Command::Centrality(a) => run_centrality(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
