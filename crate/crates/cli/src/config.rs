//! TOML run configuration.
//!
//! ```toml
//! alpha = 0.05
//! jobs = 4
//! seed = 7
//!
//! [fit]
//! grid = "auto"          # "2dp" | "halfcent" | "auto"
//! sparse_threshold = 10
//! max_iterations = 200
//!
//! [analysis]
//! return_kind = "simple" # or "log"
//! membership = "later"   # "earlier" | "both"
//!
//! [[period]]
//! label = "A"
//! start = 2007-04-02
//! end = 2009-04-10
//!
//! [synth]
//! days = 500
//! rho = 0.5
//! ```
//!
//! Every table is optional; missing keys keep their defaults. Dates may be
//! bare TOML dates or quoted `YYYY-MM-DD` strings.

use std::path::Path;

use serde::Deserialize;
use volwave::conditioning::PeriodSpec;
use volwave::pipeline::AnalysisConfig;
use volwave::synth::SynthCorpusSpec;
use volwave::wavefit::{FitConfig, GridPolicy};

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub alpha: Option<f64>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub fit: FitConfig,
    pub analysis: AnalysisConfig,
    pub period: Vec<PeriodSpec>,
    pub synth: SynthCorpusSpec,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PeriodsFile {
    #[serde(default)]
    period: Vec<PeriodSpec>,
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub fit: FitConfig,
    pub analysis: AnalysisConfig,
    pub synth: SynthCorpusSpec,
    pub jobs: usize,
}

/// Flag values that override the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub grid: Option<GridPolicy>,
    pub sparse_threshold: Option<usize>,
    pub days: Option<usize>,
    pub rho: Option<f64>,
}

// TOML dates arrive as their own value type; the library types expect
// strings.
fn dates_to_strings(v: toml::Value) -> toml::Value {
    match v {
        toml::Value::Datetime(d) => toml::Value::String(d.to_string()),
        toml::Value::Array(a) => toml::Value::Array(a.into_iter().map(dates_to_strings).collect()),
        toml::Value::Table(t) => toml::Value::Table(t.into_iter().map(|(k, v)| (k, dates_to_strings(v))).collect()),
        other => other,
    }
}

fn parse_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let value: toml::Value = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    dates_to_strings(value).try_into().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn parse_grid(s: &str) -> Result<GridPolicy, String> {
    match s {
        "2dp" => Ok(GridPolicy::TwoDecimal),
        "halfcent" => Ok(GridPolicy::HalfCent),
        "auto" => Ok(GridPolicy::Auto),
        other => Err(format!("unknown grid '{other}', expected 2dp, halfcent or auto")),
    }
}

impl RunConfig {
    pub fn load(config: Option<&Path>, periods: Option<&Path>, flags: &Overrides) -> Result<Self, CliError> {
        let file: ConfigFile = match config {
            Some(p) => parse_toml(p)?,
            None => ConfigFile::default(),
        };
        let mut fit = file.fit;
        let mut analysis = file.analysis;
        let mut synth = file.synth;
        analysis.periods.extend(file.period);
        if let Some(p) = periods {
            let extra: PeriodsFile = parse_toml(p)?;
            analysis.periods = extra.period;
        }
        if let Some(a) = flags.alpha.or(file.alpha) {
            fit.alpha = a;
            analysis.alpha = a;
        }
        if let Some(s) = flags.seed.or(file.seed) {
            synth.seed = s;
        }
        if let Some(g) = flags.grid {
            fit.grid = g;
        }
        if let Some(t) = flags.sparse_threshold {
            fit.sparse_threshold = t;
        }
        if let Some(d) = flags.days {
            synth.days = d;
        }
        if let Some(r) = flags.rho {
            synth.rho = r;
        }
        let jobs = flags.jobs.or(file.jobs).unwrap_or(1);
        if jobs == 0 {
            return Err(CliError::Config("jobs must be at least 1".into()));
        }
        let cfg = RunConfig { fit, analysis, synth, jobs };
        cfg.fit.validate().map_err(|e| CliError::Config(e.to_string()))?;
        cfg.analysis.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn full_file_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "c.toml",
            r#"
alpha = 0.1
jobs = 3
seed = 9
[fit]
grid = "2dp"
max_iterations = 50
[analysis]
return_kind = "log"
[[period]]
label = "A"
start = 2007-04-02
end = 2009-04-10
[[period]]
label = "B"
start = "2007-04-02"
end = "2007-10-16"
[synth]
days = 20
"#,
        );
        let cfg = RunConfig::load(Some(&p), None, &Overrides::default()).unwrap();
        assert_eq!(cfg.fit.alpha, 0.1);
        assert_eq!(cfg.analysis.alpha, 0.1);
        assert_eq!(cfg.fit.grid, GridPolicy::TwoDecimal);
        assert_eq!(cfg.fit.max_iterations, 50);
        assert_eq!(cfg.analysis.periods.len(), 2);
        assert_eq!(cfg.analysis.periods[0].end.to_string(), "2009-04-10");
        assert_eq!((cfg.jobs, cfg.synth.seed, cfg.synth.days), (3, 9, 20));

        let flags = Overrides { alpha: Some(0.01), grid: Some(GridPolicy::Auto), jobs: Some(1), ..Default::default() };
        let cfg = RunConfig::load(Some(&p), None, &flags).unwrap();
        assert_eq!((cfg.fit.alpha, cfg.fit.grid, cfg.jobs), (0.01, GridPolicy::Auto, 1));
    }

    #[test]
    fn bad_values_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "c.toml", "alpha = 2.0\n");
        assert!(matches!(RunConfig::load(Some(&p), None, &Overrides::default()), Err(CliError::Config(_))));
        let p = write(dir.path(), "d.toml", "bogus = 1\n");
        assert!(matches!(RunConfig::load(Some(&p), None, &Overrides::default()), Err(CliError::Config(_))));
        let p = write(dir.path(), "e.toml", "[[period]]\nlabel = \"x\"\nstart = 2008-01-05\nend = 2008-01-01\n");
        assert!(matches!(RunConfig::load(Some(&p), None, &Overrides::default()), Err(CliError::Config(_))));
        let missing = dir.path().join("missing.toml");
        assert!(matches!(RunConfig::load(Some(&missing), None, &Overrides::default()), Err(CliError::Io(_))));
        assert!(parse_grid("3dp").is_err());
    }

    #[test]
    fn periods_file_replaces_config_periods() {
        let dir = tempfile::tempdir().unwrap();
        let c = write(dir.path(), "c.toml", "[[period]]\nlabel = \"x\"\nstart = 2008-01-01\nend = 2008-02-01\n");
        let p = write(
            dir.path(),
            "p.toml",
            "[[period]]\nlabel = \"y\"\nstart = 2008-01-01\nend = 2008-03-01\n[[period]]\nlabel = \"z\"\nstart = 2008-01-01\nend = 2008-04-01\n",
        );
        let cfg = RunConfig::load(Some(&c), Some(&p), &Overrides::default()).unwrap();
        let labels: Vec<_> = cfg.analysis.periods.iter().map(|p| p.label.as_str()).collect();
        assert_eq!(labels, ["y", "z"]);
    }
}
