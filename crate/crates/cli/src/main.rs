//! `volwave`: ingest tick data, fit daily volume-price distributions, and
//! report the return / volume-change correlation study.
//!
//! Exit codes: 0 success, 2 bad configuration or input, 3 I/O failure.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use volwave::pipeline::{self, AnalysisReport};
use volwave::wavefit::GridPolicy;

use config::{parse_grid, Overrides, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<volwave::Error> for CliError {
    fn from(e: volwave::Error) -> Self {
        match e {
            volwave::Error::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "volwave", version, about = "Volume-price probability-wave analysis of tick data")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Significance level for every test.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Worker threads for per-day fits.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for synthetic corpora.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Price grid policy: 2dp, halfcent or auto.
    #[arg(long, global = true, value_parser = parse_grid)]
    grid: Option<GridPolicy>,
    /// Whole-cent price count below which the half-cent retry runs.
    #[arg(long, global = true)]
    sparse_threshold: Option<usize>,
    /// TOML file of [[period]] tables; replaces periods from --config.
    #[arg(long, global = true)]
    periods: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tick CSV to per-day histograms and daily metrics.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Histograms to classified fits and plot data.
    Fit {
        /// Directory written by `ingest`.
        #[arg(long)]
        input: PathBuf,
        /// Defaults to the input directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fits and metrics to the daily series, rates and correlation report.
    Analyze {
        /// Directory written by `fit`.
        #[arg(long)]
        input: PathBuf,
        /// Defaults to the input directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthetic tick corpus with a ground-truth sidecar.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Number of trading days.
        #[arg(long)]
        days: Option<usize>,
        /// Planted return / volume-change correlation.
        #[arg(long)]
        rho: Option<f64>,
    },
    /// ingest, fit and analyze in one go.
    Run {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn print_report(report: &AnalysisReport) {
    println!("days {}  rate pairs {}  alpha {}", report.days, report.rate_points, report.alpha);
    println!(
        "{:<12} {:>5}  {:>9} {:>8} {:>7} {:>4}  {:>9} {:>9}",
        "period", "n", "r1", "t1", "t_crit", "sig", "r2", "r3"
    );
    let num = |v: Option<f64>, w: usize, p: usize| {
        v.map(|x| format!("{x:>w$.p$}")).unwrap_or_else(|| format!("{:>w$}", "NA"))
    };
    for row in &report.periods {
        println!(
            "{:<12} {:>5}  {} {} {} {:>4}  {} {}",
            row.label,
            row.n,
            num(row.corr1.r, 9, 4),
            num(row.corr1.t, 8, 3),
            num(row.corr1.t_crit, 7, 3),
            if row.corr1.passed { "yes" } else { "no" },
            num(row.corr2.r, 9, 4),
            num(row.corr3.r, 9, 4),
        );
    }
    let s = &report.stability;
    println!(
        "single-Bessel pass rate {:.4} ({} + {} refined of {})  stability index {:.4}",
        s.pass_rate, s.first_pass, s.refined_pass, s.total_days, s.stability_index
    );
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let mut flags = Overrides {
        alpha: cli.alpha,
        jobs: cli.jobs,
        seed: cli.seed,
        grid: cli.grid,
        sparse_threshold: cli.sparse_threshold,
        ..Default::default()
    };
    if let Command::Synth { days, rho, .. } = &cli.command {
        flags.days = *days;
        flags.rho = *rho;
    }
    let cfg = RunConfig::load(cli.config.as_deref(), cli.periods.as_deref(), &flags)?;
    let dir_or = |input: &Path, out: &Option<PathBuf>| out.clone().unwrap_or_else(|| input.to_path_buf());

    match &cli.command {
        Command::Ingest { input, out } => {
            let s = pipeline::ingest(input, out)?;
            println!("ingested {} days ({} ticks) into {}", s.days, s.ticks, out.display());
            if !s.skipped.is_empty() {
                eprintln!("skipped {} days without traded volume", s.skipped.len());
            }
        }
        Command::Fit { input, out } => {
            let out = dir_or(input, out);
            let fits = pipeline::fit(input, &out, &cfg.fit, cfg.jobs)?;
            let passed = fits.iter().filter(|f| f.passed).count();
            println!("fitted {} days, {} significant, into {}", fits.len(), passed, out.display());
        }
        Command::Analyze { input, out } => {
            let out = dir_or(input, out);
            print_report(&pipeline::analyze(input, &out, &cfg.analysis)?);
        }
        Command::Synth { out, .. } => {
            let path = pipeline::synth(&cfg.synth, out)?;
            println!("wrote {} days to {}", cfg.synth.days, path.display());
        }
        Command::Run { input, out } => {
            print_report(&pipeline::run(input, out, &cfg.fit, &cfg.analysis, cfg.jobs)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("volwave: {e}");
            ExitCode::from(e.code())
        }
    }
}
