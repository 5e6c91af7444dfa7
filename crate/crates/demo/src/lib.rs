//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Three operations, each returning JSON for the page to plot:
//!
//! - [`simulate_day`]: draw a synthetic trading day from a chosen model and
//!   run the fit cascade on it;
//! - [`model_curve`]: evaluate a model on a price range;
//! - [`correlation_study`]: plan a planted-correlation corpus and test the
//!   return / volume-change correlation.

use chrono::NaiveDate;
use serde::Serialize;
use volwave::conditioning::{correlation_report, rate_series, CorrelationReport, DailySeriesPoint, ReturnKind};
use volwave::ingest::{build_histogram, DayTicks};
use volwave::synth::{plan_corpus, sample_day, SynthCorpusSpec, SynthDaySpec, TradeSize};
use volwave::wavefit::{
    fit_cascade, BesselParams, FitConfig, KummerParams, ModelKind, ModelParams, StageRecord, TwoPeakParams,
};
use volwave::{GridMode, Price};
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn params_for(model: &str, rate: f64, p0: f64, gap: f64) -> Result<ModelParams, String> {
    Ok(match model {
        "bessel" => ModelParams::Bessel0(BesselParams { c: 1.0, omega: rate, p0 }),
        "two-peak" => ModelParams::Bessel0TwoPeak(TwoPeakParams {
            left: BesselParams { c: 1.0, omega: rate, p0: p0 - gap / 2.0 },
            right: BesselParams { c: 0.7, omega: rate, p0: p0 + gap / 2.0 },
        }),
        "kummer" => ModelParams::Kummer1(KummerParams { c: 1.0, sqrt_a: rate, p0 }),
        other => return Err(format!("unknown model '{other}'")),
    })
}

#[derive(Serialize)]
struct DayResult {
    prices: Vec<f64>,
    observed: Vec<f64>,
    fitted: Vec<Option<f64>>,
    kind: ModelKind,
    passed: bool,
    r_squared: Option<f64>,
    r2_crit: Option<f64>,
    params: Option<ModelParams>,
    stage_log: Vec<StageRecord>,
}

/// Samples `trades` trades from `model` ("bessel", "two-peak" or "kummer")
/// on a whole-cent grid of ±`half_width` around `p0`, then classifies the
/// day. `gap` is the two-peak component distance in currency units.
#[allow(clippy::too_many_arguments)]
pub fn simulate_day_json(
    model: &str,
    rate: f64,
    p0: f64,
    gap: f64,
    half_width: f64,
    trades: u32,
    seed: u32,
    alpha: f64,
) -> Result<String, String> {
    let params = params_for(model, rate, p0, gap)?;
    let center = (p0 * 100.0).round() as i64 * 10;
    let hw = (half_width * 100.0).round().max(1.0) as i64 * 10;
    if center - hw <= 0 {
        return Err(err("price grid must stay above zero"));
    }
    let spec = SynthDaySpec {
        day: NaiveDate::from_ymd_opt(2008, 1, 2).unwrap(),
        params,
        grid_min: Price::from_milli((center - hw) as u64),
        grid_max: Price::from_milli((center + hw) as u64),
        tick: GridMode::TwoDecimal,
        trade_count: trades as u64,
        trade_size: TradeSize::Constant { shares: 100 },
        seed: seed as u64,
        stream: 0,
    };
    let ticks = sample_day(&spec).map_err(err)?;
    let config = FitConfig { alpha, ..FitConfig::default() };
    config.validate().map_err(err)?;
    let day = DayTicks { day: spec.day, ticks };
    let fit = fit_cascade(&day, &config);
    let hist = build_histogram(&day.ticks, fit.grid_mode.unwrap_or(GridMode::TwoDecimal)).map_err(err)?;
    let prices = hist.prices_f64();
    let result = DayResult {
        fitted: prices.iter().map(|&p| fit.params.map(|m| m.eval(p))).collect(),
        observed: hist.probabilities().to_vec(),
        prices,
        kind: fit.kind,
        passed: fit.passed,
        r_squared: fit.r_squared,
        r2_crit: fit.r2_crit,
        params: fit.params,
        stage_log: fit.stage_log,
    };
    serde_json::to_string(&result).map_err(err)
}

/// Model values at `points` evenly spaced prices on `[lo, hi]`, with C = 1.
pub fn model_curve_values(
    model: &str,
    rate: f64,
    p0: f64,
    gap: f64,
    lo: f64,
    hi: f64,
    points: u32,
) -> Result<Vec<f64>, String> {
    if points < 2 || hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return Err(err("need at least two points and hi > lo"));
    }
    let params = params_for(model, rate, p0, gap)?;
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points).map(|i| params.eval(lo + i as f64 * step)).collect())
}

#[derive(Serialize)]
struct StudyResult {
    sample_corr: Option<f64>,
    report: CorrelationReport,
    ret: Vec<f64>,
    dint: Vec<f64>,
}

/// Plans a corpus with planted correlation `rho` and tests the correlation
/// between the true equilibrium-price return and volume change.
pub fn correlation_study_json(rho: f64, days: u32, seed: u32, alpha: f64) -> Result<String, String> {
    let spec = SynthCorpusSpec { rho, days: days as usize, seed: seed as u64, ..SynthCorpusSpec::default() };
    let truth = plan_corpus(&spec).map_err(err)?;
    let series: Vec<DailySeriesPoint> = truth
        .days
        .iter()
        .map(|d| DailySeriesPoint {
            day: d.day,
            equilibrium_price: d.p0,
            total_volume: d.total_volume as f64,
            total_amount: d.p0 * d.total_volume as f64,
            fit_kind: d.params.kind(),
        })
        .collect();
    let rates = rate_series(&series, ReturnKind::Simple).map_err(err)?;
    let report = correlation_report("synthetic", &rates, alpha).map_err(err)?;
    let result = StudyResult {
        sample_corr: truth.sample_corr,
        report,
        ret: rates.iter().map(|r| r.mean_return_rate).collect(),
        dint: rates.iter().map(|r| r.intensity_change_rate).collect(),
    };
    serde_json::to_string(&result).map_err(err)
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn simulate_day(
    model: &str,
    rate: f64,
    p0: f64,
    gap: f64,
    half_width: f64,
    trades: u32,
    seed: u32,
    alpha: f64,
) -> Result<String, JsValue> {
    simulate_day_json(model, rate, p0, gap, half_width, trades, seed, alpha).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn model_curve(
    model: &str,
    rate: f64,
    p0: f64,
    gap: f64,
    lo: f64,
    hi: f64,
    points: u32,
) -> Result<Vec<f64>, JsValue> {
    model_curve_values(model, rate, p0, gap, lo, hi, points).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn correlation_study(rho: f64, days: u32, seed: u32, alpha: f64) -> Result<String, JsValue> {
    correlation_study_json(rho, days, seed, alpha).map_err(|e| JsValue::from_str(&e))
}
