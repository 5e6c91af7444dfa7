//! Goodness-of-fit and correlation statistics.

use serde::{Deserialize, Serialize};

use crate::specfun::{f_critical, t_critical};
use crate::{Error, Result};

/// Outcome of a one-statistic significance test. `passed` is `statistic >
/// critical`, strictly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub statistic: f64,
    pub critical: f64,
    pub alpha: f64,
    pub passed: bool,
    /// Degrees of freedom of the reference distribution (`df2` unused for t).
    pub df1: u32,
    pub df2: Option<u32>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Coefficient of determination `1 − RSS/TSS`.
pub fn r_squared(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    if observed.len() != predicted.len() || observed.len() < 2 {
        return Err(Error::domain(format!(
            "r_squared needs equal lengths ≥ 2, got {} and {}",
            observed.len(),
            predicted.len()
        )));
    }
    let m = mean(observed);
    let tss: f64 = observed.iter().map(|y| (y - m).powi(2)).sum();
    if tss == 0.0 {
        return Err(Error::ZeroVariance("observed"));
    }
    let rss: f64 = observed.iter().zip(predicted).map(|(y, f)| (y - f).powi(2)).sum();
    Ok(1.0 - rss / tss)
}

fn check_dims(n: usize, k: usize) -> Result<()> {
    if k == 0 || n <= k + 1 {
        Err(Error::domain(format!("need n > k + 1 with k ≥ 1, got n = {n}, k = {k}")))
    } else {
        Ok(())
    }
}

/// F = (R²/k) / ((1 − R²)/(n − k − 1)).
pub fn f_statistic(r2: f64, n: usize, k: usize) -> Result<f64> {
    check_dims(n, k)?;
    if !(r2 < 1.0) {
        return Err(Error::domain(format!("f_statistic needs R² < 1, got {r2}")));
    }
    Ok((r2 / k as f64) / ((1.0 - r2) / (n - k - 1) as f64))
}

/// R² threshold `k·F / (k·F + n − k − 1)` with `F = F_alpha(k, n − k − 1)`.
pub fn r2_crit(alpha: f64, n: usize, k: usize) -> Result<f64> {
    check_dims(n, k)?;
    let df2 = (n - k - 1) as u32;
    let kf = k as f64 * f_critical(alpha, k as u32, df2)?;
    Ok(kf / (kf + df2 as f64))
}

/// Sample Pearson correlation (two-pass, normalization-free).
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::domain(format!("pearson_r needs equal lengths ≥ 3, got {} and {}", x.len(), y.len())));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::ZeroVariance("x"));
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance("y"));
    }
    // sqrt(fl(a²)) == a, so identical series give exactly 1.
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// t = |r| √((n − 2)/(1 − r²)), testing H₀: ρ = 0.
pub fn t_stat_correlation(r: f64, n: usize) -> Result<f64> {
    if !(r.abs() < 1.0) {
        return Err(Error::domain(format!("|r| must be < 1, got {r}")));
    }
    if n < 3 {
        return Err(Error::domain(format!("need n ≥ 3, got {n}")));
    }
    Ok(r.abs() * ((n - 2) as f64 / (1.0 - r * r)).sqrt())
}

/// Two-sided t test of a correlation coefficient against zero.
pub fn correlation_significant(r: f64, n: usize, alpha: f64) -> Result<SignificanceResult> {
    let statistic = t_stat_correlation(r, n)?;
    let df = (n - 2) as u32;
    let critical = t_critical(alpha, df)?;
    Ok(SignificanceResult { statistic, critical, alpha, passed: statistic > critical, df1: df, df2: None })
}
