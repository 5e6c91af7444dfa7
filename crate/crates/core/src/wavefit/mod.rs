//! Probability-wave regression models, their damped least-squares fit, and
//! the per-day significance cascade.

mod cascade;
mod init;
mod lm;
mod model;

use serde::{Deserialize, Serialize};

pub use cascade::{classify, fit_cascade, fit_model, plot_rows, ClassifiedFit, FitStage, ModelFit, StageRecord};
pub use init::init_guess;
pub use lm::{lm_fit, lm_fit_points, LmFit, ParamBounds};
pub use model::{model_bessel0, model_bessel0_two, model_kummer1};

use crate::ingest::DailyMetrics;
use crate::{Error, Result};

/// Model attached to a classified day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    Bessel0,
    Bessel0TwoPeak,
    Kummer1,
    Unfit,
    Degenerate,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Bessel0 => "Bessel0",
            ModelKind::Bessel0TwoPeak => "Bessel0TwoPeak",
            ModelKind::Kummer1 => "Kummer1",
            ModelKind::Unfit => "Unfit",
            ModelKind::Degenerate => "Degenerate",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// `C·|J0(ω(p − p0))|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesselParams {
    pub c: f64,
    /// Eigenvalue ω, per currency unit.
    pub omega: f64,
    pub p0: f64,
}

/// Two superposed Bessel components, ordered `left.p0 < right.p0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPeakParams {
    pub left: BesselParams,
    pub right: BesselParams,
}

/// `C·e^{−√A|p−p0|}·|1 − 2√A|p−p0||`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KummerParams {
    pub c: f64,
    /// √A, per currency unit.
    pub sqrt_a: f64,
    pub p0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model")]
pub enum ModelParams {
    Bessel0(BesselParams),
    Bessel0TwoPeak(TwoPeakParams),
    Kummer1(KummerParams),
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Bessel0(_) => ModelKind::Bessel0,
            ModelParams::Bessel0TwoPeak(_) => ModelKind::Bessel0TwoPeak,
            ModelParams::Kummer1(_) => ModelKind::Kummer1,
        }
    }

    pub fn eval(&self, p: f64) -> f64 {
        match self {
            ModelParams::Bessel0(b) => model_bessel0(p, b),
            ModelParams::Bessel0TwoPeak(t) => model_bessel0_two(p, t),
            ModelParams::Kummer1(k) => model_kummer1(p, k),
        }
    }

    /// Equilibrium price of a single-peak model.
    pub fn p0(&self) -> Option<f64> {
        match self {
            ModelParams::Bessel0(b) => Some(b.p0),
            ModelParams::Kummer1(k) => Some(k.p0),
            ModelParams::Bessel0TwoPeak(_) => None,
        }
    }

    /// Compact `name=value` rendering used by the CSV fit export.
    pub fn to_compact(&self) -> String {
        match self {
            ModelParams::Bessel0(b) => format!("C={};omega={};p0={}", b.c, b.omega, b.p0),
            ModelParams::Bessel0TwoPeak(t) => format!(
                "C1={};omega1={};p01={};C2={};omega2={};p02={}",
                t.left.c, t.left.omega, t.left.p0, t.right.c, t.right.omega, t.right.p0
            ),
            ModelParams::Kummer1(k) => format!("C={};sqrtA={};p0={}", k.c, k.sqrt_a, k.p0),
        }
    }
}

/// Which price grid the cascade starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GridPolicy {
    /// Whole-cent grid first, half-cent retry for sparse days.
    #[default]
    #[serde(rename = "auto")]
    Auto,
    /// Whole-cent grid only.
    #[serde(rename = "2dp")]
    TwoDecimal,
    /// Half-cent grid only.
    #[serde(rename = "halfcent")]
    HalfCent,
}

/// Solver and cascade settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub max_iterations: usize,
    pub lambda_init: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    /// Converged when an accepted step improves SSR by less than this fraction.
    pub ssr_rel_tol: f64,
    /// Converged when the parameter step norm falls below this.
    pub step_tol: f64,
    /// Relative central-difference step for the Jacobian.
    pub jacobian_step: f64,
    pub alpha: f64,
    /// Number of p0 seeds (argmax, weighted mean, grid midpoint).
    pub multistart_count: usize,
    /// Points in the per-seed rate-constant scan that picks extra starts.
    pub scan_points: usize,
    /// Days with fewer whole-cent prices than this get the half-cent retry.
    pub sparse_threshold: usize,
    /// Minimum two-peak separation, in grid ticks.
    pub min_peak_separation_ticks: f64,
    pub grid: GridPolicy,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iterations: 200,
            lambda_init: 1e-3,
            lambda_up: 10.0,
            lambda_down: 0.1,
            ssr_rel_tol: 1e-10,
            step_tol: 1e-12,
            jacobian_step: 1e-6,
            alpha: 0.05,
            multistart_count: 3,
            scan_points: 48,
            sparse_threshold: 10,
            min_peak_separation_ticks: 2.0,
            grid: GridPolicy::Auto,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda_init", self.lambda_init),
            ("lambda_up", self.lambda_up),
            ("lambda_down", self.lambda_down),
            ("ssr_rel_tol", self.ssr_rel_tol),
            ("step_tol", self.step_tol),
            ("jacobian_step", self.jacobian_step),
            ("min_peak_separation_ticks", self.min_peak_separation_ticks),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.lambda_up <= 1.0 || self.lambda_down >= 1.0 {
            return Err(Error::domain("need lambda_up > 1 and lambda_down < 1"));
        }
        if self.max_iterations == 0 || self.multistart_count == 0 || self.sparse_threshold == 0 {
            return Err(Error::domain("max_iterations, multistart_count and sparse_threshold must be positive"));
        }
        Ok(())
    }
}

/// E = (1 + 2n)·√A.
pub fn kummer_energy(sqrt_a: f64, n: u32) -> Result<f64> {
    if !(sqrt_a > 0.0) {
        return Err(Error::domain(format!("sqrtA must be positive, got {sqrt_a}")));
    }
    Ok((1.0 + 2.0 * n as f64) * sqrt_a)
}

/// The day's stationary equilibrium price: the fitted p0 of a significant
/// single-Bessel fit, otherwise the volume-weighted mean price.
pub fn equilibrium_price(fit: &ClassifiedFit, metrics: &DailyMetrics) -> f64 {
    match (fit.kind, fit.passed, fit.params) {
        (ModelKind::Bessel0, true, Some(ModelParams::Bessel0(b))) => b.p0,
        _ => metrics.weighted_mean_price,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kummer_energy_examples() {
        assert_eq!(kummer_energy(2.0, 1).unwrap(), 6.0);
        assert_eq!(kummer_energy(0.37, 0).unwrap(), 0.37);
        assert_eq!(kummer_energy(3.0, 2).unwrap(), 15.0);
        assert!(kummer_energy(0.0, 1).is_err());
        assert!(kummer_energy(-1.0, 1).is_err());
    }

    #[test]
    fn default_config_is_valid() {
        FitConfig::default().validate().unwrap();
        let bad = FitConfig { alpha: 1.5, ..FitConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn params_json_shape() {
        let p = ModelParams::Bessel0(BesselParams { c: 0.2, omega: 80.0, p0: 3.5 });
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"model":"Bessel0","c":0.2,"omega":80.0,"p0":3.5}"#);
        assert_eq!(serde_json::from_str::<ModelParams>(&s).unwrap(), p);
    }
}
