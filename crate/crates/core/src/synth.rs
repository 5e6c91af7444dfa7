//! Seeded synthetic tick data.
//!
//! A day is drawn from one of the wave models, normalized over a price grid,
//! by inverse-CDF sampling. A corpus strings days together along a
//! random-walk equilibrium price whose daily return is correlated with the
//! daily volume change through a Gaussian copula.
//!
//! All randomness comes from ChaCha8 (`rand_chacha`), seeded with
//! `seed_from_u64(seed)`. Corpus day `i` samples ticks on stream `i + 1`; the
//! day-level trajectory uses stream 0, so days can be generated in any order
//! or in parallel with identical output.

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ingest::{DayTicks, GridMode, Price, TickRecord, Timestamp};
use crate::stats::pearson_r;
use crate::wavefit::{BesselParams, KummerParams, ModelParams, TwoPeakParams};
use crate::{Error, Result};

const SESSION_OPEN_MS: u64 = 9 * 3_600_000 + 30 * 60_000;
const SESSION_LEN_MS: u64 = 5 * 3_600_000 + 30 * 60_000;

/// Shares per trade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum TradeSize {
    Constant {
        shares: u64,
    },
    /// 1 + Geometric(1/mean) shares, mean `mean`.
    Geometric {
        mean: f64,
    },
}

impl TradeSize {
    pub fn mean(&self) -> f64 {
        match *self {
            TradeSize::Constant { shares } => shares as f64,
            TradeSize::Geometric { mean } => mean,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            TradeSize::Constant { shares: 0 } => Err(Error::domain("trade size must be at least 1 share")),
            TradeSize::Geometric { mean } if !(mean >= 1.0 && mean.is_finite()) => {
                Err(Error::domain(format!("geometric trade size mean must be ≥ 1, got {mean}")))
            }
            _ => Ok(()),
        }
    }
}

impl Default for TradeSize {
    fn default() -> Self {
        TradeSize::Constant { shares: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthDaySpec {
    pub day: NaiveDate,
    pub params: ModelParams,
    pub grid_min: Price,
    pub grid_max: Price,
    /// Grid spacing: whole cents or half cents.
    pub tick: GridMode,
    pub trade_count: u64,
    pub trade_size: TradeSize,
    pub seed: u64,
    /// ChaCha stream; lets one seed drive many independent days.
    #[serde(default)]
    pub stream: u64,
}

impl SynthDaySpec {
    pub fn validate(&self) -> Result<()> {
        if self.trade_count == 0 {
            return Err(Error::domain("trade_count must be at least 1"));
        }
        self.trade_size.validate()?;
        let step = self.tick.tick().milli();
        if self.grid_min > self.grid_max || self.grid_min.milli() == 0 {
            return Err(Error::domain(format!("bad grid [{}, {}]", self.grid_min, self.grid_max)));
        }
        if !self.grid_min.milli().is_multiple_of(step) || !self.grid_max.milli().is_multiple_of(step) {
            return Err(Error::domain(format!("grid bounds must be multiples of {}", self.tick.tick())));
        }
        let (lo, hi) = (self.grid_min.to_f64(), self.grid_max.to_f64());
        let centers: Vec<f64> = match self.params {
            ModelParams::Bessel0(b) => vec![b.p0],
            ModelParams::Kummer1(k) => vec![k.p0],
            ModelParams::Bessel0TwoPeak(t) => vec![t.left.p0, t.right.p0],
        };
        if centers.iter().any(|&p| !(lo <= p && p <= hi)) {
            return Err(Error::domain(format!("grid [{lo}, {hi}] does not contain the model center")));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<Price> {
        let step = self.tick.tick().milli();
        (self.grid_min.milli()..=self.grid_max.milli()).step_by(step as usize).map(Price::from_milli).collect()
    }
}

/// The model normalized to a probability mass over the day's grid.
pub fn model_distribution(spec: &SynthDaySpec) -> Result<(Vec<Price>, Vec<f64>)> {
    spec.validate()?;
    let grid = spec.grid();
    let w: Vec<f64> = grid.iter().map(|p| spec.params.eval(p.to_f64())).collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::domain("model has no mass on the grid"));
    }
    Ok((grid, w.into_iter().map(|x| x / total).collect()))
}

fn sample_with(spec: &SynthDaySpec, rng: &mut ChaCha8Rng) -> Result<Vec<TickRecord>> {
    let (grid, probs) = model_distribution(spec)?;
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in &probs {
        acc += p;
        cdf.push(acc);
    }
    let last_positive = probs.iter().rposition(|&p| p > 0.0).expect("mass checked above");
    let geometric = match spec.trade_size {
        TradeSize::Geometric { mean } => Some(Geometric::new(1.0 / mean).map_err(|e| Error::domain(e.to_string()))?),
        TradeSize::Constant { .. } => None,
    };
    let n = spec.trade_count;
    let mut out = Vec::with_capacity(n as usize);
    for i in 0..n {
        let u: f64 = rng.random::<f64>() * acc;
        let idx = cdf.partition_point(|&c| c <= u).min(last_positive);
        let volume = match (&geometric, spec.trade_size) {
            (Some(g), _) => 1 + g.sample(rng),
            (None, TradeSize::Constant { shares }) => shares,
            _ => unreachable!(),
        };
        out.push(TickRecord {
            day: spec.day,
            timestamp: Timestamp((SESSION_OPEN_MS + i * SESSION_LEN_MS / n) as u32),
            price: grid[idx],
            volume,
        });
    }
    Ok(out)
}

/// Draws `trade_count` trades from the normalized model. Deterministic in
/// `(seed, stream)`.
pub fn sample_day(spec: &SynthDaySpec) -> Result<Vec<TickRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(spec.stream);
    sample_with(spec, &mut rng)
}

/// Relative weights of the day shapes in a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapeMix {
    pub bessel: f64,
    pub two_peak: f64,
    pub kummer: f64,
}

impl Default for ShapeMix {
    fn default() -> Self {
        ShapeMix { bessel: 1.0, two_peak: 0.0, kummer: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthCorpusSpec {
    pub start_day: NaiveDate,
    pub days: usize,
    pub initial_price: f64,
    /// σ of the daily simple return of the equilibrium price.
    pub return_sigma: f64,
    /// Planted correlation between return and volume change.
    pub rho: f64,
    /// Long-run daily volume, shares.
    pub base_volume: u64,
    /// Log-volume response s to one unit of the copula variable.
    pub volume_sensitivity: f64,
    /// Pull κ of log volume back toward the base level per day.
    pub volume_reversion: f64,
    pub trade_size: TradeSize,
    pub shape: ShapeMix,
    pub omega: f64,
    pub sqrt_a: f64,
    /// Two-peak component distance, in ticks.
    pub peak_gap_ticks: u64,
    /// Grid half-width around the day's center, in ticks.
    pub half_width_ticks: u64,
    pub tick: GridMode,
    pub seed: u64,
}

impl Default for SynthCorpusSpec {
    fn default() -> Self {
        SynthCorpusSpec {
            start_day: NaiveDate::from_ymd_opt(2007, 1, 4).unwrap(),
            days: 500,
            initial_price: 3.5,
            return_sigma: 0.01,
            rho: 0.5,
            base_volume: 200_000,
            volume_sensitivity: 0.1,
            volume_reversion: 0.05,
            trade_size: TradeSize::default(),
            shape: ShapeMix::default(),
            omega: 80.0,
            sqrt_a: 20.0,
            peak_gap_ticks: 12,
            half_width_ticks: 20,
            tick: GridMode::TwoDecimal,
            seed: 0,
        }
    }
}

impl SynthCorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.days < 3 {
            return Err(Error::domain(format!("need at least 3 days, got {}", self.days)));
        }
        if !(self.rho.abs() <= 1.0) {
            return Err(Error::domain(format!("|rho| must be ≤ 1, got {}", self.rho)));
        }
        let positive = [
            ("initial_price", self.initial_price),
            ("return_sigma", self.return_sigma),
            ("omega", self.omega),
            ("sqrt_a", self.sqrt_a),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.volume_sensitivity >= 0.0 && self.volume_reversion >= 0.0 && self.volume_reversion < 1.0) {
            return Err(Error::domain("need volume_sensitivity ≥ 0 and 0 ≤ volume_reversion < 1"));
        }
        if self.base_volume == 0 {
            return Err(Error::domain("base_volume must be positive"));
        }
        self.trade_size.validate()?;
        let m = self.shape;
        if [m.bessel, m.two_peak, m.kummer].iter().any(|w| !(*w >= 0.0)) || m.bessel + m.two_peak + m.kummer <= 0.0 {
            return Err(Error::domain("shape weights must be nonnegative with a positive sum"));
        }
        if m.two_peak > 0.0 && 2 * self.half_width_ticks <= self.peak_gap_ticks {
            return Err(Error::domain("half_width_ticks must exceed half of peak_gap_ticks"));
        }
        if self.half_width_ticks == 0 {
            return Err(Error::domain("half_width_ticks must be positive"));
        }
        Ok(())
    }
}

/// Ground truth for one corpus day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthDayTruth {
    pub index: usize,
    pub day: NaiveDate,
    /// True equilibrium price before any grid snapping.
    pub p0: f64,
    pub params: ModelParams,
    pub grid_min: Price,
    pub grid_max: Price,
    pub trade_count: u64,
    /// Exact for constant trade sizes; the planned level otherwise.
    pub total_volume: u64,
    /// Simple return of p0 from the previous day.
    pub ret: Option<f64>,
    /// Copula variable driving the volume change.
    pub u: Option<f64>,
}

/// Ground-truth sidecar of a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub generator: String,
    pub spec: SynthCorpusSpec,
    /// Sample corr(ret, u) over days 1..
    pub sample_corr: Option<f64>,
    pub days: Vec<SynthDayTruth>,
}

fn next_trading_day(d: NaiveDate) -> NaiveDate {
    let mut n = d + Days::new(1);
    while matches!(n.weekday(), Weekday::Sat | Weekday::Sun) {
        n = n + Days::new(1);
    }
    n
}

fn first_trading_day(d: NaiveDate) -> NaiveDate {
    if matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
        next_trading_day(d)
    } else {
        d
    }
}

fn day_params(spec: &SynthCorpusSpec, p0: f64, shape: u8) -> ModelParams {
    let tick = spec.tick.tick().to_f64();
    match shape {
        0 => ModelParams::Bessel0(BesselParams { c: 1.0, omega: spec.omega, p0 }),
        1 => {
            let half = 0.5 * spec.peak_gap_ticks as f64 * tick;
            ModelParams::Bessel0TwoPeak(TwoPeakParams {
                left: BesselParams { c: 1.0, omega: spec.omega, p0: p0 - half },
                right: BesselParams { c: 0.7, omega: spec.omega, p0: p0 + half },
            })
        }
        _ => ModelParams::Kummer1(KummerParams { c: 1.0, sqrt_a: spec.sqrt_a, p0 }),
    }
}

/// Day-level trajectory of a corpus: dates, equilibrium prices, shapes and
/// volumes. Cheap; no ticks are drawn.
pub fn plan_corpus(spec: &SynthCorpusSpec) -> Result<SynthTruth> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(0);
    let step = spec.tick.tick().milli();
    let mix = spec.shape;
    let mix_total = mix.bessel + mix.two_peak + mix.kummer;
    let ln_base = (spec.base_volume as f64).ln();
    let mean_size = spec.trade_size.mean();

    let mut out = Vec::with_capacity(spec.days);
    let mut day = first_trading_day(spec.start_day);
    let mut p0 = spec.initial_price;
    let mut ln_v = ln_base;
    for index in 0..spec.days {
        let (ret, u) = if index == 0 {
            (None, None)
        } else {
            let z: f64 = rng.sample(StandardNormal);
            let e: f64 = rng.sample(StandardNormal);
            let r = spec.return_sigma * z;
            let u = spec.rho * z + (1.0 - spec.rho * spec.rho).sqrt() * e;
            p0 *= 1.0 + r;
            ln_v += spec.volume_sensitivity * u - spec.volume_reversion * (ln_v - ln_base);
            (Some(r), Some(u))
        };
        let pick = rng.random::<f64>() * mix_total;
        let shape = if pick < mix.bessel {
            0
        } else if pick < mix.bessel + mix.two_peak {
            1
        } else {
            2
        };
        if !(p0 > 0.0) {
            return Err(Error::domain(format!("equilibrium price left the positive axis on day {index}")));
        }
        let center = ((p0 * 1000.0 / step as f64).round() as u64) * step;
        let hw = spec.half_width_ticks * step;
        if center <= hw {
            return Err(Error::domain(format!("grid reaches zero on day {index}; raise initial_price")));
        }
        let trade_count = ((ln_v.exp() / mean_size).round() as u64).max(1);
        let total_volume = match spec.trade_size {
            TradeSize::Constant { shares } => trade_count * shares,
            TradeSize::Geometric { .. } => ln_v.exp().round() as u64,
        };
        out.push(SynthDayTruth {
            index,
            day,
            p0,
            params: day_params(spec, p0, shape),
            grid_min: Price::from_milli(center - hw),
            grid_max: Price::from_milli(center + hw),
            trade_count,
            total_volume,
            ret,
            u,
        });
        day = next_trading_day(day);
    }
    let rs: Vec<f64> = out.iter().filter_map(|d| d.ret).collect();
    let us: Vec<f64> = out.iter().filter_map(|d| d.u).collect();
    Ok(SynthTruth {
        generator: "ChaCha8 seed_from_u64(seed); day i on stream i+1, trajectory on stream 0".to_string(),
        spec: spec.clone(),
        sample_corr: pearson_r(&rs, &us).ok(),
        days: out,
    })
}

/// Tick sampling spec for one planned day.
pub fn day_spec(spec: &SynthCorpusSpec, truth: &SynthDayTruth) -> SynthDaySpec {
    SynthDaySpec {
        day: truth.day,
        params: truth.params,
        grid_min: truth.grid_min,
        grid_max: truth.grid_max,
        tick: spec.tick,
        trade_count: truth.trade_count,
        trade_size: spec.trade_size,
        seed: spec.seed,
        stream: truth.index as u64 + 1,
    }
}

/// Ticks of one planned day.
pub fn sample_corpus_day(spec: &SynthCorpusSpec, truth: &SynthDayTruth) -> Result<DayTicks> {
    Ok(DayTicks { day: truth.day, ticks: sample_day(&day_spec(spec, truth))? })
}

/// Whole corpus: ground truth plus every day's ticks.
pub fn synth_corpus(spec: &SynthCorpusSpec) -> Result<(SynthTruth, Vec<DayTicks>)> {
    let truth = plan_corpus(spec)?;
    let days = truth.days.iter().map(|t| sample_corpus_day(spec, t)).collect::<Result<Vec<_>>>()?;
    Ok((truth, days))
}
