//! The ingest → fit → analyze chain and its on-disk artifacts.
//!
//! Layout of an output directory:
//!
//! ```text
//! daily_metrics.csv
//! ingest_summary.json
//! histograms/2dp/<day>.csv
//! histograms/halfcent/<day>.csv
//! fits.json
//! fits.csv
//! plots/<day>.csv
//! daily_series.csv
//! rates.csv
//! report.json
//! ```
//!
//! Each stage reads only what the previous stage wrote, so running the
//! stages one by one gives the same files as [`run`].

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::conditioning::{
    correlation_report, rate_series, split_periods, write_rates_csv, CorrelationReport, DailySeriesPoint,
    PeriodMembership, PeriodSpec, ReturnKind, StabilitySummary,
};
use crate::ingest::{
    build_histogram, day_summary, parse_ticks, read_metrics_csv, write_metrics_csv, write_ticks_csv, DailyMetrics,
    GridMode, VolumeHistogram,
};
use crate::synth::{synth_corpus, SynthCorpusSpec};
use crate::wavefit::{classify, plot_rows, ClassifiedFit, FitConfig, GridPolicy};
use crate::{Error, Result};

pub const METRICS_FILE: &str = "daily_metrics.csv";
pub const INGEST_SUMMARY_FILE: &str = "ingest_summary.json";
pub const FITS_JSON: &str = "fits.json";
pub const FITS_CSV: &str = "fits.csv";
pub const SERIES_FILE: &str = "daily_series.csv";
pub const RATES_FILE: &str = "rates.csv";
pub const REPORT_FILE: &str = "report.json";
pub const TICKS_FILE: &str = "ticks.csv";
pub const TRUTH_FILE: &str = "truth.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub alpha: f64,
    pub return_kind: ReturnKind,
    pub membership: PeriodMembership,
    /// Empty means one period spanning all data, labelled `all`.
    pub periods: Vec<PeriodSpec>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            alpha: 0.05,
            return_kind: ReturnKind::Simple,
            membership: PeriodMembership::Later,
            periods: Vec::new(),
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        self.periods.iter().try_for_each(PeriodSpec::validate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub days: usize,
    pub ticks: usize,
    /// Days dropped because they carried no traded volume.
    pub skipped: Vec<NaiveDate>,
}

/// `report.json` contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub alpha: f64,
    pub return_kind: ReturnKind,
    pub membership: PeriodMembership,
    pub days: usize,
    pub rate_points: usize,
    pub periods: Vec<CorrelationReport>,
    pub stability: StabilitySummary,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

/// Re-labels the generic errors of a file-backed read with the file path.
fn in_file<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io { message, .. } => Error::io(path, message),
        Error::Parse { line, message } => Error::Parse { line, message: format!("{}: {message}", path.display()) },
        Error::Domain { line, message } => Error::Domain { line, message: format!("{}: {message}", path.display()) },
        Error::EmptyInput => Error::Domain { line: None, message: format!("{}: input is empty", path.display()) },
        other => other,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::io(path, e))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?)
        .map_err(|e| Error::Domain { line: Some(e.line() as u64), message: format!("{}: {e}", path.display()) })
}

pub fn histogram_path(out: &Path, mode: GridMode, day: NaiveDate) -> PathBuf {
    out.join("histograms").join(mode.label()).join(format!("{}.csv", day.format("%Y-%m-%d")))
}

pub fn plot_path(out: &Path, day: NaiveDate) -> PathBuf {
    out.join("plots").join(format!("{}.csv", day.format("%Y-%m-%d")))
}

/// Parses a tick CSV and writes both histograms of every traded day plus the
/// daily metrics.
pub fn ingest(input: &Path, out: &Path) -> Result<IngestSummary> {
    let days = in_file(input, parse_ticks(open(input)?))?;
    let mut metrics = Vec::with_capacity(days.len());
    let mut skipped = Vec::new();
    let mut ticks = 0;
    for day in &days {
        ticks += day.ticks.len();
        let m = match day_summary(&day.ticks) {
            Ok(m) => m,
            Err(Error::DegenerateDay(_)) => {
                skipped.push(day.day);
                continue;
            }
            Err(e) => return Err(e),
        };
        for mode in [GridMode::TwoDecimal, GridMode::HalfCent] {
            let path = histogram_path(out, mode, day.day);
            build_histogram(&day.ticks, mode)?.write_csv(create(&path)?)?;
        }
        metrics.push(m);
    }
    if metrics.is_empty() {
        return Err(Error::Domain { line: None, message: format!("{}: no day with traded volume", input.display()) });
    }
    let path = out.join(METRICS_FILE);
    in_file(&path, write_metrics_csv(&metrics, create(&path)?))?;
    let summary = IngestSummary { days: metrics.len(), ticks, skipped };
    write_json(&out.join(INGEST_SUMMARY_FILE), &summary)?;
    Ok(summary)
}

fn load_metrics(out: &Path) -> Result<Vec<DailyMetrics>> {
    let path = out.join(METRICS_FILE);
    in_file(&path, read_metrics_csv(open(&path)?))
}

fn load_histogram(out: &Path, mode: GridMode, day: NaiveDate) -> Result<VolumeHistogram> {
    let path = histogram_path(out, mode, day);
    in_file(&path, VolumeHistogram::read_csv(day, mode, open(&path)?))
}

fn fit_day(out: &Path, day: NaiveDate, config: &FitConfig) -> Result<(ClassifiedFit, VolumeHistogram)> {
    let (primary, refined) = match config.grid {
        GridPolicy::Auto => {
            (load_histogram(out, GridMode::TwoDecimal, day)?, Some(load_histogram(out, GridMode::HalfCent, day)?))
        }
        GridPolicy::TwoDecimal => (load_histogram(out, GridMode::TwoDecimal, day)?, None),
        GridPolicy::HalfCent => (load_histogram(out, GridMode::HalfCent, day)?, None),
    };
    let fit = classify(day, &primary, refined.as_ref(), config);
    let plotted = match (fit.grid_mode, &refined) {
        (Some(GridMode::HalfCent), Some(r)) => r.clone(),
        _ => primary,
    };
    Ok((fit, plotted))
}

/// Runs `f` over `0..n` on `jobs` threads; results come back in index order.
fn parallel_map<T: Send>(n: usize, jobs: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let jobs = jobs.clamp(1, n.max(1));
    if jobs == 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..jobs)
            .map(|_| {
                s.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= n {
                            break;
                        }
                        done.push((i, f(i)));
                    }
                    done
                })
            })
            .collect();
        for h in handles {
            for (i, v) in h.join().expect("fit worker panicked") {
                slots[i] = Some(v);
            }
        }
    });
    slots.into_iter().map(|v| v.expect("every index visited")).collect()
}

fn write_fits_csv(path: &Path, fits: &[ClassifiedFit]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let io = |e: csv::Error| Error::io(path, e);
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    w.write_record([
        "day",
        "kind",
        "grid",
        "params",
        "r_squared",
        "f_stat",
        "r2_crit",
        "passed",
        "iterations",
        "stage_log",
    ])
    .map_err(io)?;
    for f in fits {
        w.write_record([
            f.day.format("%Y-%m-%d").to_string(),
            f.kind.label().to_string(),
            f.grid_mode.map(|g| g.label().to_string()).unwrap_or_default(),
            f.params.map(|p| p.to_compact()).unwrap_or_default(),
            opt(f.r_squared),
            opt(f.f_stat),
            opt(f.r2_crit),
            f.passed.to_string(),
            f.iterations.to_string(),
            f.stage_log_compact(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_plot(path: &Path, hist: &VolumeHistogram, fit: &ClassifiedFit) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let io = |e: csv::Error| Error::io(path, e);
    w.write_record(["price", "observed_prob", "fitted_prob"]).map_err(io)?;
    for (p, obs, fitted) in plot_rows(hist, fit) {
        w.write_record([p.to_string(), obs.to_string(), fitted.map(|v| v.to_string()).unwrap_or_default()])
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Classifies every day ingested into `src` and writes fits and plot data to
/// `out` (which may be `src`).
pub fn fit(src: &Path, out: &Path, config: &FitConfig, jobs: usize) -> Result<Vec<ClassifiedFit>> {
    config.validate()?;
    let metrics = load_metrics(src)?;
    let results = parallel_map(metrics.len(), jobs, |i| fit_day(src, metrics[i].day, config));
    let mut fits = Vec::with_capacity(metrics.len());
    for r in results {
        let (fit, hist) = r?;
        write_plot(&plot_path(out, fit.day), &hist, &fit)?;
        fits.push(fit);
    }
    write_json(&out.join(FITS_JSON), &fits)?;
    write_fits_csv(&out.join(FITS_CSV), &fits)?;
    Ok(fits)
}

fn write_series_csv(path: &Path, series: &[DailySeriesPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let io = |e: csv::Error| Error::io(path, e);
    w.write_record(["day", "equilibrium_price", "total_volume", "total_amount", "fit_kind"]).map_err(io)?;
    for p in series {
        w.write_record([
            p.day.format("%Y-%m-%d").to_string(),
            p.equilibrium_price.to_string(),
            p.total_volume.to_string(),
            p.total_amount.to_string(),
            p.fit_kind.label().to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Builds the daily series, rate series, correlation table and stability
/// summary from the metrics and fits in `src`, writing them to `out`.
pub fn analyze(src: &Path, out: &Path, config: &AnalysisConfig) -> Result<AnalysisReport> {
    config.validate()?;
    let metrics = load_metrics(src)?;
    let fits: Vec<ClassifiedFit> = read_json(&src.join(FITS_JSON))?;
    if fits.len() != metrics.len() || fits.iter().zip(&metrics).any(|(f, m)| f.day != m.day) {
        return Err(Error::domain(format!("{} and {} cover different days; rerun fit", FITS_JSON, METRICS_FILE)));
    }
    let series: Vec<DailySeriesPoint> =
        fits.iter().zip(&metrics).map(|(f, m)| DailySeriesPoint::from_fit(f, m)).collect();
    write_series_csv(&out.join(SERIES_FILE), &series)?;
    let rates = rate_series(&series, config.return_kind)?;
    let path = out.join(RATES_FILE);
    in_file(&path, write_rates_csv(&rates, create(&path)?))?;

    let periods = if config.periods.is_empty() {
        vec![PeriodSpec { label: "all".into(), start: series[0].day, end: series[series.len() - 1].day }]
    } else {
        config.periods.clone()
    };
    let split = split_periods(&rates, &periods, config.membership)?;
    let rows = periods
        .iter()
        .zip(&split)
        .map(|(p, r)| match correlation_report(&p.label, r, config.alpha) {
            Ok(rep) => rep,
            Err(e) => CorrelationReport::unavailable(&p.label, r, &e),
        })
        .collect();
    let report = AnalysisReport {
        alpha: config.alpha,
        return_kind: config.return_kind,
        membership: config.membership,
        days: series.len(),
        rate_points: rates.len(),
        periods: rows,
        stability: StabilitySummary::from_fits(&fits)?,
    };
    write_json(&out.join(REPORT_FILE), &report)?;
    Ok(report)
}

/// `ingest`, `fit` and `analyze` in sequence.
pub fn run(
    input: &Path,
    out: &Path,
    fit_config: &FitConfig,
    analysis: &AnalysisConfig,
    jobs: usize,
) -> Result<AnalysisReport> {
    fit_config.validate()?;
    analysis.validate()?;
    ingest(input, out)?;
    fit(out, out, fit_config, jobs)?;
    analyze(out, out, analysis)
}

/// Writes a synthetic corpus as `ticks.csv` plus its `truth.json` sidecar.
pub fn synth(spec: &SynthCorpusSpec, out: &Path) -> Result<PathBuf> {
    let (truth, days) = synth_corpus(spec)?;
    let path = out.join(TICKS_FILE);
    in_file(&path, write_ticks_csv(&days, create(&path)?))?;
    write_json(&out.join(TRUTH_FILE), &truth)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_map_keeps_order() {
        let v = parallel_map(100, 7, |i| i * i);
        assert_eq!(v, (0..100).map(|i| i * i).collect::<Vec<_>>());
        assert!(parallel_map(0, 4, |i| i).is_empty());
    }

    #[test]
    fn small_corpus_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthCorpusSpec { days: 8, base_volume: 40_000, seed: 4, ..Default::default() };
        let ticks = synth(&spec, dir.path()).unwrap();
        let out = dir.path().join("out");
        let report = run(&ticks, &out, &FitConfig::default(), &AnalysisConfig::default(), 3).unwrap();
        assert_eq!(report.days, 8);
        assert_eq!(report.rate_points, 7);
        assert_eq!(report.periods.len(), 1);
        assert_eq!(report.periods[0].n, 7);
        for name in [METRICS_FILE, FITS_JSON, FITS_CSV, SERIES_FILE, RATES_FILE, REPORT_FILE] {
            assert!(out.join(name).is_file(), "{name}");
        }
        let fits: Vec<ClassifiedFit> = read_json(&out.join(FITS_JSON)).unwrap();
        assert!(fits.iter().all(|f| f.passed));
        assert!(plot_path(&out, fits[0].day).is_file());
    }

    #[test]
    fn missing_input_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = ingest(&dir.path().join("nope.csv"), dir.path()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
