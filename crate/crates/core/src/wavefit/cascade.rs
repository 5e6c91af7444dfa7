//! Multistart model fits and the per-day significance cascade.
//!
//! Stages, in order:
//!
//! 1. single Bessel on the primary grid, k = 1;
//! 2. single Bessel on the half-cent grid, only for sparse days (fewer
//!    primary prices than `sparse_threshold`), k = 1;
//! 3. two-peak Bessel superposition, k = 2;
//! 4. first-order Kummer, k = 1.
//!
//! A stage passes when R² exceeds the critical R² of the F test. Stages 3 and
//! 4 use the half-cent histogram when stage 2 ran, the primary one otherwise.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::init::{argmax, profile_starts, single_guess, two_peak_from_sides, valley_split};
use super::lm::{lm_fit_points, LmFit, ParamBounds};
use super::{init_guess, FitConfig, GridPolicy, ModelKind, ModelParams, TwoPeakParams};
use crate::ingest::{build_histogram, DayTicks, GridMode, Price, VolumeHistogram};
use crate::stats::{f_statistic, r2_crit, r_squared};
use crate::{Error, Result};

/// Extra starts taken from the rate scan for each p0 seed.
const SCAN_STARTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FitStage {
    /// Single Bessel on the primary grid.
    Primary,
    /// Single Bessel on the half-cent grid.
    Refined,
    TwoPeak,
    Kummer,
}

impl FitStage {
    pub fn model(self) -> ModelKind {
        match self {
            FitStage::Primary | FitStage::Refined => ModelKind::Bessel0,
            FitStage::TwoPeak => ModelKind::Bessel0TwoPeak,
            FitStage::Kummer => ModelKind::Kummer1,
        }
    }

    /// Explanatory-variable count used in the F test.
    pub fn k(self) -> usize {
        match self {
            FitStage::TwoPeak => 2,
            _ => 1,
        }
    }
}

/// One attempted cascade stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: FitStage,
    pub grid_mode: GridMode,
    pub n_points: usize,
    pub params: Option<ModelParams>,
    pub r_squared: Option<f64>,
    pub r2_crit: Option<f64>,
    pub passed: bool,
    pub iterations: usize,
    /// Why the stage could not be evaluated or was rejected, if it was.
    pub note: Option<String>,
}

/// Cascade outcome for one day. When no stage passes, `kind` is `Unfit` and
/// the scalar fields repeat the last attempted stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedFit {
    pub day: NaiveDate,
    pub kind: ModelKind,
    pub params: Option<ModelParams>,
    pub grid_mode: Option<GridMode>,
    pub r_squared: Option<f64>,
    /// `None` when R² = 1 (the statistic is unbounded) or not computed.
    pub f_stat: Option<f64>,
    pub r2_crit: Option<f64>,
    pub passed: bool,
    pub iterations: usize,
    pub stage_log: Vec<StageRecord>,
}

impl ClassifiedFit {
    fn degenerate(day: NaiveDate, note: String) -> Self {
        ClassifiedFit {
            day,
            kind: ModelKind::Degenerate,
            params: None,
            grid_mode: None,
            r_squared: None,
            f_stat: None,
            r2_crit: None,
            passed: false,
            iterations: 0,
            stage_log: vec![StageRecord {
                stage: FitStage::Primary,
                grid_mode: GridMode::TwoDecimal,
                n_points: 0,
                params: None,
                r_squared: None,
                r2_crit: None,
                passed: false,
                iterations: 0,
                note: Some(note),
            }],
        }
    }

    /// Stage that produced an accepted fit.
    pub fn accepted_stage(&self) -> Option<FitStage> {
        if self.passed {
            self.stage_log.iter().rev().find(|s| s.passed).map(|s| s.stage)
        } else {
            None
        }
    }

    /// Significant single-Bessel fit (either grid).
    pub fn is_bessel_pass(&self) -> bool {
        self.kind == ModelKind::Bessel0 && self.passed
    }

    /// Stage log as `Stage@grid:R²` items joined by `;`, for CSV export.
    pub fn stage_log_compact(&self) -> String {
        self.stage_log
            .iter()
            .map(|s| {
                let r2 = s.r_squared.map(|v| v.to_string()).unwrap_or_else(|| "NA".into());
                let mark = if s.passed { "+" } else { "-" };
                format!("{:?}@{}:{}{}", s.stage, s.grid_mode, r2, mark)
            })
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Best multistart fit of one model to a histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFit {
    pub lm: LmFit,
    /// Index of the winning start (diagnostics).
    pub start: usize,
    pub starts_tried: usize,
}

fn better(a: &LmFit, b: &LmFit) -> bool {
    a.ssr < b.ssr
}

fn single_starts(
    kind: ModelKind,
    xs: &[f64],
    ys: &[f64],
    tick: f64,
    off_grid: bool,
    config: &FitConfig,
) -> Vec<ModelParams> {
    let mean: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum::<f64>() / ys.iter().sum::<f64>();
    let mid = 0.5 * (xs[0] + xs[xs.len() - 1]);
    let mut seeds: Vec<f64> = Vec::new();
    for p0 in [xs[argmax(ys)], mean, mid].into_iter().take(config.multistart_count) {
        if !seeds.iter().any(|&s| (s - p0).abs() < 1e-12) {
            seeds.push(p0);
        }
    }
    let mut starts = Vec::new();
    for &p0 in &seeds {
        starts.push(single_guess(kind, xs, ys, p0, tick));
        starts.extend(profile_starts(kind, xs, ys, p0, tick, config.scan_points, SCAN_STARTS));
    }
    // Off-grid centres: at a fixed on-grid p0 a fast rate can alias. Left
    // out of the sub-fits that seed the two-peak model, where the aliased
    // optimum makes a worse seed.
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    for off in if off_grid { &[-0.5, -0.25, 0.25, 0.5][..] } else { &[] } {
        let p0 = (seeds[0] + off * tick).clamp(lo, hi);
        starts.extend(profile_starts(kind, xs, ys, p0, tick, config.scan_points, 1));
    }
    starts
}

fn run_starts(
    xs: &[f64],
    ys: &[f64],
    starts: &[ModelParams],
    bounds: &ParamBounds,
    config: &FitConfig,
) -> Option<ModelFit> {
    let mut best: Option<ModelFit> = None;
    for (i, s) in starts.iter().enumerate() {
        let lm = lm_fit_points(xs, ys, s, bounds, config);
        if !lm.ssr.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|b| better(&lm, &b.lm)) {
            best = Some(ModelFit { lm, start: i, starts_tried: starts.len() });
        }
    }
    best
}

fn fit_single_points(
    kind: ModelKind,
    xs: &[f64],
    ys: &[f64],
    tick: f64,
    off_grid: bool,
    config: &FitConfig,
) -> Option<ModelFit> {
    let bounds = ParamBounds::for_prices(xs[0], xs[xs.len() - 1]);
    run_starts(xs, ys, &single_starts(kind, xs, ys, tick, off_grid, config), &bounds, config)
}

fn bessel_of(p: &ModelParams) -> super::BesselParams {
    match p {
        ModelParams::Bessel0(b) => *b,
        _ => unreachable!(),
    }
}

fn fit_two_peak_points(xs: &[f64], ys: &[f64], tick: f64, config: &FitConfig) -> Option<ModelFit> {
    let n = xs.len();
    let split = valley_split(ys);
    let mut starts = vec![ModelParams::Bessel0TwoPeak(two_peak_from_sides(xs, ys, split, tick))];

    // Each side fitted on its own.
    if split >= 2 && n - split >= 2 {
        let side = |r: std::ops::Range<usize>| {
            let sx = &xs[r.clone()];
            let sy = &ys[r];
            if sx.len() >= 4 {
                fit_single_points(ModelKind::Bessel0, sx, sy, tick, false, config).map(|f| bessel_of(&f.lm.params))
            } else {
                Some(bessel_of(&single_guess(ModelKind::Bessel0, sx, sy, sx[argmax(sy)], tick)))
            }
        };
        if let (Some(left), Some(right)) = (side(0..split), side(split..n)) {
            starts.push(ModelParams::Bessel0TwoPeak(TwoPeakParams { left, right }));
        }
    }

    // Whole-day single fit, then a second component on the positive residual.
    if let Some(first) = fit_single_points(ModelKind::Bessel0, xs, ys, tick, false, config) {
        let first = bessel_of(&first.lm.params);
        let resid: Vec<f64> =
            xs.iter().zip(ys).map(|(&x, &y)| (y - super::model_bessel0(x, &first)).max(0.0)).collect();
        if resid.iter().any(|&r| r > 0.0) {
            if let Some(second) = fit_single_points(ModelKind::Bessel0, xs, &resid, tick, false, config) {
                starts.push(ModelParams::Bessel0TwoPeak(TwoPeakParams {
                    left: first,
                    right: bessel_of(&second.lm.params),
                }));
            }
        }
    }

    let bounds = ParamBounds::for_prices(xs[0], xs[n - 1]);
    let mut best = run_starts(xs, ys, &starts, &bounds, config)?;
    if let ModelParams::Bessel0TwoPeak(t) = &mut best.lm.params {
        if t.left.p0 > t.right.p0 {
            std::mem::swap(&mut t.left, &mut t.right);
        }
    }
    Some(best)
}

/// Multistart least-squares fit of `kind` to a histogram.
///
/// Single-peak models start from [`init_guess`] at each p0 seed (highest
/// bin, volume-weighted mean, grid midpoint) plus the lowest local minima of
/// a closed-form rate scan at that seed, and at quarter-tick offsets from the
/// highest bin. The two-peak model starts from its
/// valley split, from independent per-side fits, and from a whole-day fit
/// paired with a fit to its positive residual. The lowest SSR wins.
pub fn fit_model(hist: &VolumeHistogram, kind: ModelKind, config: &FitConfig) -> Result<ModelFit> {
    let min_points = if kind == ModelKind::Bessel0TwoPeak { 7 } else { 4 };
    if hist.len() < min_points {
        return Err(Error::DegenerateDay(format!(
            "{}: {} prices, {kind} needs at least {min_points}",
            hist.day(),
            hist.len()
        )));
    }
    // Validates the kind and the point count the same way callers see it.
    init_guess(hist, kind)?;
    let xs = hist.prices_f64();
    let ys = hist.probabilities();
    let tick = hist.grid_mode().tick().to_f64();
    let fit = match kind {
        ModelKind::Bessel0 | ModelKind::Kummer1 => fit_single_points(kind, &xs, ys, tick, true, config),
        ModelKind::Bessel0TwoPeak => fit_two_peak_points(&xs, ys, tick, config),
        _ => unreachable!(),
    };
    fit.ok_or_else(|| Error::domain(format!("{}: every start produced a non-finite SSR", hist.day())))
}

fn run_stage(stage: FitStage, hist: &VolumeHistogram, config: &FitConfig) -> StageRecord {
    let kind = stage.model();
    let k = stage.k();
    let n = hist.len();
    let mut rec = StageRecord {
        stage,
        grid_mode: hist.grid_mode(),
        n_points: n,
        params: None,
        r_squared: None,
        r2_crit: None,
        passed: false,
        iterations: 0,
        note: None,
    };
    let fit = match fit_model(hist, kind, config) {
        Ok(f) => f,
        Err(e) => {
            rec.note = Some(e.to_string());
            return rec;
        }
    };
    rec.params = Some(fit.lm.params);
    rec.iterations = fit.lm.iterations;
    if fit.lm.singular {
        rec.note = Some("singular normal matrix".into());
    } else if !fit.lm.converged {
        rec.note = Some("no convergence within max_iterations".into());
    }
    let xs = hist.prices_f64();
    let fitted: Vec<f64> = xs.iter().map(|&x| fit.lm.params.eval(x)).collect();
    let r2 = match r_squared(hist.probabilities(), &fitted) {
        Ok(v) => v,
        Err(e) => {
            rec.note = Some(e.to_string());
            return rec;
        }
    };
    rec.r_squared = Some(r2);
    let crit = match r2_crit(config.alpha, n, k) {
        Ok(c) => c,
        Err(e) => {
            rec.note = Some(e.to_string());
            return rec;
        }
    };
    rec.r2_crit = Some(crit);
    rec.passed = r2 > crit;

    if let ModelParams::Bessel0TwoPeak(t) = fit.lm.params {
        let tick = hist.grid_mode().tick().to_f64();
        if (t.right.p0 - t.left.p0) < config.min_peak_separation_ticks * tick - 1e-12 {
            rec.passed = false;
            rec.note = Some(format!(
                "collapsed: peaks {:.4} and {:.4} closer than {} ticks",
                t.left.p0, t.right.p0, config.min_peak_separation_ticks
            ));
        }
    }
    rec
}

fn finish(day: NaiveDate, stage_log: Vec<StageRecord>) -> ClassifiedFit {
    let reported = stage_log
        .iter()
        .rev()
        .find(|s| s.passed)
        .or_else(|| stage_log.iter().rev().find(|s| s.params.is_some()))
        .or(stage_log.last())
        .cloned()
        .expect("stage log is never empty here");
    let kind = if reported.passed { reported.stage.model() } else { ModelKind::Unfit };
    let f_stat = reported.r_squared.and_then(|r2| f_statistic(r2, reported.n_points, reported.stage.k()).ok());
    ClassifiedFit {
        day,
        kind,
        params: reported.params,
        grid_mode: Some(reported.grid_mode),
        r_squared: reported.r_squared,
        f_stat,
        r2_crit: reported.r2_crit,
        passed: reported.passed,
        iterations: reported.iterations,
        stage_log,
    }
}

/// Runs the cascade on prepared histograms. `refined` is the half-cent
/// histogram offered to sparse days; pass `None` to disable the retry.
pub fn classify(
    day: NaiveDate,
    primary: &VolumeHistogram,
    refined: Option<&VolumeHistogram>,
    config: &FitConfig,
) -> ClassifiedFit {
    let usable_refined = refined.filter(|h| h.len() >= 4);
    if primary.len() < 4 && usable_refined.is_none() {
        return ClassifiedFit::degenerate(day, format!("{} distinct grid prices; at least 4 needed", primary.len()));
    }

    let mut log = Vec::new();
    let first = run_stage(FitStage::Primary, primary, config);
    let first_passed = first.passed;
    log.push(first);
    if first_passed {
        return finish(day, log);
    }

    let mut working = primary;
    if let Some(refined) = usable_refined {
        if primary.len() < config.sparse_threshold {
            let rec = run_stage(FitStage::Refined, refined, config);
            let passed = rec.passed;
            log.push(rec);
            if passed {
                return finish(day, log);
            }
            working = refined;
        }
    }

    for stage in [FitStage::TwoPeak, FitStage::Kummer] {
        let rec = run_stage(stage, working, config);
        let passed = rec.passed;
        log.push(rec);
        if passed {
            break;
        }
    }
    finish(day, log)
}

/// Histograms the cascade needs for one day under `policy`.
pub(crate) fn cascade_histograms(
    day: &DayTicks,
    policy: GridPolicy,
) -> Result<(VolumeHistogram, Option<VolumeHistogram>)> {
    Ok(match policy {
        GridPolicy::Auto => {
            (build_histogram(&day.ticks, GridMode::TwoDecimal)?, Some(build_histogram(&day.ticks, GridMode::HalfCent)?))
        }
        GridPolicy::TwoDecimal => (build_histogram(&day.ticks, GridMode::TwoDecimal)?, None),
        GridPolicy::HalfCent => (build_histogram(&day.ticks, GridMode::HalfCent)?, None),
    })
}

/// Builds the day's histograms and classifies it.
pub fn fit_cascade(day: &DayTicks, config: &FitConfig) -> ClassifiedFit {
    match cascade_histograms(day, config.grid) {
        Ok((primary, refined)) => classify(day.day, &primary, refined.as_ref(), config),
        Err(e) => ClassifiedFit::degenerate(day.day, e.to_string()),
    }
}

/// `(price, observed, fitted)` rows for plotting a day's reported fit.
pub fn plot_rows(hist: &VolumeHistogram, fit: &ClassifiedFit) -> Vec<(Price, f64, Option<f64>)> {
    hist.prices()
        .iter()
        .zip(hist.probabilities())
        .map(|(&p, &obs)| (p, obs, fit.params.map(|m| m.eval(p.to_f64()))))
        .collect()
}
