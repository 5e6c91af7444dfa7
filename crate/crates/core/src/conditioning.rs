//! Day-over-day rate series, the period-split correlation study, and the
//! stability index.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::ingest::DailyMetrics;
use crate::stats::{correlation_significant, pearson_r};
use crate::wavefit::{equilibrium_price, ClassifiedFit, FitStage, ModelKind};
use crate::{Error, Result};

/// One trading day as seen by the correlation study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailySeriesPoint {
    pub day: NaiveDate,
    /// p₀, currency per share.
    pub equilibrium_price: f64,
    /// V, shares.
    pub total_volume: f64,
    /// M = Σ p·v, currency.
    pub total_amount: f64,
    pub fit_kind: ModelKind,
}

impl DailySeriesPoint {
    pub fn from_fit(fit: &ClassifiedFit, metrics: &DailyMetrics) -> Self {
        DailySeriesPoint {
            day: metrics.day,
            equilibrium_price: equilibrium_price(fit, metrics),
            total_volume: metrics.total_volume as f64,
            total_amount: metrics.total_amount(),
            fit_kind: fit.kind,
        }
    }
}

/// Rates between two consecutive trading days.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub prev_day: NaiveDate,
    pub day: NaiveDate,
    pub mean_return_rate: f64,
    pub intensity_change_rate: f64,
    pub amount_change_rate: f64,
}

/// How day-over-day changes are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReturnKind {
    /// (xₜ − xₜ₋₁) / xₜ₋₁
    #[default]
    Simple,
    /// ln(xₜ / xₜ₋₁), applied to all three rates.
    Log,
}

fn change(prev: f64, cur: f64, kind: ReturnKind) -> f64 {
    match kind {
        ReturnKind::Simple => (cur - prev) / prev,
        ReturnKind::Log => (cur / prev).ln(),
    }
}

/// Rates for every adjacent pair of `daily`. Adjacency is list order;
/// calendar gaps are ignored.
pub fn rate_series(daily: &[DailySeriesPoint], kind: ReturnKind) -> Result<Vec<RatePoint>> {
    if daily.len() < 2 {
        return Err(Error::TooFewDays { needed: 2, got: daily.len() });
    }
    for d in daily {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(d.equilibrium_price) && ok(d.total_volume) && ok(d.total_amount)) {
            return Err(Error::domain(format!("{}: price, volume and amount must be finite and positive", d.day)));
        }
    }
    daily
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            if b.day <= a.day {
                return Err(Error::domain(format!("days must be strictly increasing: {} then {}", a.day, b.day)));
            }
            Ok(RatePoint {
                prev_day: a.day,
                day: b.day,
                mean_return_rate: change(a.equilibrium_price, b.equilibrium_price, kind),
                intensity_change_rate: change(a.total_volume, b.total_volume, kind),
                amount_change_rate: change(a.total_amount, b.total_amount, kind),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodSpec {
    pub label: String,
    pub start: NaiveDate,
    /// Inclusive.
    pub end: NaiveDate,
}

impl PeriodSpec {
    pub fn new(label: impl Into<String>, start: NaiveDate, end: NaiveDate) -> Result<Self> {
        let p = PeriodSpec { label: label.into(), start, end };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.start > self.end {
            return Err(Error::domain(format!("period {}: start {} after end {}", self.label, self.start, self.end)));
        }
        Ok(())
    }

    pub fn contains(&self, day: NaiveDate) -> bool {
        self.start <= day && day <= self.end
    }
}

/// Which day of a pair decides its period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeriodMembership {
    /// The later day t.
    #[default]
    Later,
    /// The earlier day t − 1.
    Earlier,
    /// Both days must fall in the period.
    Both,
}

impl PeriodMembership {
    fn admits(self, period: &PeriodSpec, r: &RatePoint) -> bool {
        match self {
            PeriodMembership::Later => period.contains(r.day),
            PeriodMembership::Earlier => period.contains(r.prev_day),
            PeriodMembership::Both => period.contains(r.prev_day) && period.contains(r.day),
        }
    }
}

/// Rate points of each period, in period order. A point lands in every
/// period that admits it.
pub fn split_periods(
    rates: &[RatePoint],
    periods: &[PeriodSpec],
    membership: PeriodMembership,
) -> Result<Vec<Vec<RatePoint>>> {
    periods
        .iter()
        .map(|p| {
            p.validate()?;
            Ok(rates.iter().filter(|r| membership.admits(p, r)).copied().collect())
        })
        .collect()
}

/// One correlation column. `t` is absent when |r| = 1; `error` is set when
/// the coefficient could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub r: Option<f64>,
    pub t: Option<f64>,
    pub t_crit: Option<f64>,
    pub passed: bool,
    pub error: Option<String>,
}

impl CorrelationEntry {
    fn failed(e: Error) -> Self {
        CorrelationEntry { r: None, t: None, t_crit: None, passed: false, error: Some(e.to_string()) }
    }

    fn compute(x: &[f64], y: &[f64], alpha: f64) -> Self {
        let r = match pearson_r(x, y) {
            Ok(r) => r,
            Err(e) => return Self::failed(e),
        };
        if r.abs() == 1.0 {
            let t_crit = crate::specfun::t_critical(alpha, (x.len() - 2) as u32).ok();
            return CorrelationEntry { r: Some(r), t: None, t_crit, passed: true, error: None };
        }
        match correlation_significant(r, x.len(), alpha) {
            Ok(s) => CorrelationEntry {
                r: Some(r),
                t: Some(s.statistic),
                t_crit: Some(s.critical),
                passed: s.passed,
                error: None,
            },
            Err(e) => CorrelationEntry { r: Some(r), ..Self::failed(e) },
        }
    }
}

/// One row of the correlation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub label: String,
    pub n: usize,
    /// Later day of the first and last pair.
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
    /// Return ↔ intensity change.
    pub corr1: CorrelationEntry,
    /// Return ↔ amount change.
    pub corr2: CorrelationEntry,
    /// Intensity change ↔ amount change.
    pub corr3: CorrelationEntry,
}

impl CorrelationReport {
    /// Row for a period that could not be analysed; every entry carries `err`.
    pub fn unavailable(label: &str, rates: &[RatePoint], err: &Error) -> Self {
        let entry = CorrelationEntry::failed(err.clone());
        CorrelationReport {
            label: label.to_string(),
            n: rates.len(),
            start: rates.first().map(|r| r.day),
            end: rates.last().map(|r| r.day),
            corr1: entry.clone(),
            corr2: entry.clone(),
            corr3: entry,
        }
    }
}

pub fn correlation_report(label: &str, rates: &[RatePoint], alpha: f64) -> Result<CorrelationReport> {
    if rates.len() < 3 {
        return Err(Error::TooFewPairs { needed: 3, got: rates.len() });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let ret: Vec<f64> = rates.iter().map(|r| r.mean_return_rate).collect();
    let dint: Vec<f64> = rates.iter().map(|r| r.intensity_change_rate).collect();
    let damt: Vec<f64> = rates.iter().map(|r| r.amount_change_rate).collect();
    Ok(CorrelationReport {
        label: label.to_string(),
        n: rates.len(),
        start: rates.first().map(|r| r.day),
        end: rates.last().map(|r| r.day),
        corr1: CorrelationEntry::compute(&ret, &dint, alpha),
        corr2: CorrelationEntry::compute(&ret, &damt, alpha),
        corr3: CorrelationEntry::compute(&dint, &damt, alpha),
    })
}

/// Share of days that are not a significant single-Bessel fit.
pub fn stability_index(fits: &[ClassifiedFit]) -> Result<f64> {
    Ok(StabilitySummary::from_fits(fits)?.stability_index)
}

/// Cascade pass counts behind the stability index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilitySummary {
    pub total_days: usize,
    /// Single-Bessel passes on the primary grid.
    pub first_pass: usize,
    /// Single-Bessel passes after the half-cent retry.
    pub refined_pass: usize,
    pub two_peak: usize,
    pub kummer: usize,
    pub unfit: usize,
    pub degenerate: usize,
    /// (first_pass + refined_pass) / total_days.
    pub pass_rate: f64,
    /// 1 − pass_rate.
    pub stability_index: f64,
    /// Abnormal share before the half-cent retry, 1 − first_pass / total_days.
    pub pre_refinement_abnormal_share: f64,
}

impl StabilitySummary {
    /// Summary from stage counts alone; the other-kind counts are left at 0.
    pub fn from_counts(total_days: usize, first_pass: usize, refined_pass: usize) -> Result<Self> {
        if total_days == 0 {
            return Err(Error::EmptyInput);
        }
        if first_pass + refined_pass > total_days {
            return Err(Error::domain(format!("{first_pass} + {refined_pass} passes exceed {total_days} days")));
        }
        let total = total_days as f64;
        let pass_rate = (first_pass + refined_pass) as f64 / total;
        Ok(StabilitySummary {
            total_days,
            first_pass,
            refined_pass,
            two_peak: 0,
            kummer: 0,
            unfit: 0,
            degenerate: 0,
            pass_rate,
            stability_index: (total_days - first_pass - refined_pass) as f64 / total,
            pre_refinement_abnormal_share: (total_days - first_pass) as f64 / total,
        })
    }

    pub fn from_fits(fits: &[ClassifiedFit]) -> Result<Self> {
        let (mut first, mut refined) = (0, 0);
        let (mut two, mut kummer, mut unfit, mut degenerate) = (0, 0, 0, 0);
        for f in fits {
            match (f.kind, f.passed) {
                (ModelKind::Bessel0, true) => match f.accepted_stage() {
                    Some(FitStage::Refined) => refined += 1,
                    _ => first += 1,
                },
                (ModelKind::Bessel0TwoPeak, true) => two += 1,
                (ModelKind::Kummer1, true) => kummer += 1,
                (ModelKind::Degenerate, _) => degenerate += 1,
                _ => unfit += 1,
            }
        }
        let mut s = Self::from_counts(fits.len(), first, refined)?;
        s.two_peak = two;
        s.kummer = kummer;
        s.unfit = unfit;
        s.degenerate = degenerate;
        Ok(s)
    }
}

/// Writes the rate series as `day,ret,dint,damt`, keyed by the later day.
pub fn write_rates_csv<W: std::io::Write>(rates: &[RatePoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::io("rates csv", e);
    w.write_record(["day", "ret", "dint", "damt"]).map_err(io)?;
    for r in rates {
        w.write_record([
            r.day.format("%Y-%m-%d").to_string(),
            r.mean_return_rate.to_string(),
            r.intensity_change_rate.to_string(),
            r.amount_change_rate.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io("rates csv", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn d(n: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2007, 1, 1).unwrap() + chrono::Days::new(n as u64)
    }

    fn point(n: u32, p: f64, v: f64, m: f64) -> DailySeriesPoint {
        DailySeriesPoint {
            day: d(n),
            equilibrium_price: p,
            total_volume: v,
            total_amount: m,
            fit_kind: ModelKind::Bessel0,
        }
    }

    fn rates_from(ret: &[f64], dint: &[f64], damt: &[f64]) -> Vec<RatePoint> {
        (0..ret.len())
            .map(|i| RatePoint {
                prev_day: d(i as u32),
                day: d(i as u32 + 1),
                mean_return_rate: ret[i],
                intensity_change_rate: dint[i],
                amount_change_rate: damt[i],
            })
            .collect()
    }

    fn fit(kind: ModelKind, passed: bool, stage: FitStage) -> ClassifiedFit {
        ClassifiedFit {
            day: d(0),
            kind,
            params: None,
            grid_mode: None,
            r_squared: None,
            f_stat: None,
            r2_crit: None,
            passed,
            iterations: 0,
            stage_log: vec![crate::wavefit::StageRecord {
                stage,
                grid_mode: crate::GridMode::TwoDecimal,
                n_points: 10,
                params: None,
                r_squared: None,
                r2_crit: None,
                passed,
                iterations: 0,
                note: None,
            }],
        }
    }

    #[test]
    fn rate_examples() {
        let r =
            rate_series(&[point(0, 10.0, 100.0, 1000.0), point(1, 11.0, 120.0, 1320.0)], ReturnKind::Simple).unwrap();
        assert_eq!(r.len(), 1);
        assert_abs_diff_eq!(r[0].mean_return_rate, 0.10, epsilon = 1e-15);
        assert_abs_diff_eq!(r[0].intensity_change_rate, 0.20, epsilon = 1e-15);
        assert_abs_diff_eq!(r[0].amount_change_rate, 0.32, epsilon = 1e-15);
        assert_eq!((r[0].prev_day, r[0].day), (d(0), d(1)));

        let flat: Vec<_> = (0..5).map(|i| point(i * 2, 3.0, 7.0, 21.0)).collect();
        let r = rate_series(&flat, ReturnKind::Simple).unwrap();
        assert_eq!(r.len(), 4);
        assert!(r
            .iter()
            .all(|p| p.mean_return_rate == 0.0 && p.intensity_change_rate == 0.0 && p.amount_change_rate == 0.0));

        let r = rate_series(&[point(0, 10.0, 100.0, 1.0), point(1, 11.0, 100.0, 1.0)], ReturnKind::Log).unwrap();
        assert_abs_diff_eq!(r[0].mean_return_rate, 1.1f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn rate_errors() {
        assert_eq!(
            rate_series(&[point(0, 1.0, 1.0, 1.0)], ReturnKind::Simple),
            Err(Error::TooFewDays { needed: 2, got: 1 })
        );
        assert!(rate_series(&[point(1, 1.0, 1.0, 1.0), point(1, 1.0, 1.0, 1.0)], ReturnKind::Simple).is_err());
        assert!(rate_series(&[point(0, 1.0, 0.0, 1.0), point(1, 1.0, 1.0, 1.0)], ReturnKind::Simple).is_err());
    }

    #[test]
    fn split_examples() {
        let rates = rates_from(&[0.0; 10], &[0.0; 10], &[0.0; 10]);
        let all = PeriodSpec::new("all", d(0), d(100)).unwrap();
        let first = PeriodSpec::new("h1", d(0), d(5)).unwrap();
        let second = PeriodSpec::new("h2", d(6), d(10)).unwrap();
        let outside = PeriodSpec::new("none", d(200), d(300)).unwrap();
        let split = split_periods(&rates, &[all, first, second, outside], PeriodMembership::Later).unwrap();
        assert_eq!(split[0].len(), 10);
        assert_eq!(split[1].len() + split[2].len(), 10);
        // Pair (d4, d5) belongs to h1 by its later day; (d5, d6) to h2.
        assert_eq!(split[1].len(), 5);
        assert!(split[3].is_empty());

        let h1 = PeriodSpec::new("h1", d(0), d(5)).unwrap();
        assert_eq!(split_periods(&rates, std::slice::from_ref(&h1), PeriodMembership::Earlier).unwrap()[0].len(), 6);
        assert_eq!(split_periods(&rates, &[h1], PeriodMembership::Both).unwrap()[0].len(), 5);
        assert!(PeriodSpec::new("bad", d(5), d(4)).is_err());
    }

    #[test]
    fn duplicated_intensity_as_amount() {
        let x = [0.1, -0.2, 0.05, 0.3, -0.1];
        let y = [0.2, 0.1, -0.3, 0.0, 0.15];
        let rep = correlation_report("dup", &rates_from(&y, &x, &x), 0.05).unwrap();
        assert_eq!(rep.corr3.r, Some(1.0));
        assert!(rep.corr3.passed);
        assert!(rep.corr3.t.is_none());
        assert_eq!(rep.n, 5);
        assert_eq!((rep.start, rep.end), (Some(d(1)), Some(d(5))));
    }

    #[test]
    fn identical_return_and_intensity() {
        let x = [0.1, -0.2, 0.05, 0.3, -0.1, 0.0];
        let rep = correlation_report("eq", &rates_from(&x, &x, &[1.0, 2.0, 0.0, 4.0, 3.0, 5.0]), 0.05).unwrap();
        assert_eq!(rep.corr1.r, Some(1.0));
    }

    #[test]
    fn too_few_pairs_and_zero_variance() {
        let r = rates_from(&[0.1, 0.2], &[0.1, 0.3], &[0.0, 0.1]);
        assert_eq!(correlation_report("x", &r, 0.05), Err(Error::TooFewPairs { needed: 3, got: 2 }));
        let r = rates_from(&[0.1, 0.2, 0.3], &[0.0; 3], &[0.0, 0.1, 0.5]);
        let rep = correlation_report("x", &r, 0.05).unwrap();
        assert!(rep.corr1.error.is_some() && !rep.corr1.passed);
        assert!(rep.corr3.error.is_some());
        assert!(rep.corr2.error.is_none());
    }

    #[test]
    fn planted_correlation_recovered() {
        // u = ρ z + √(1 − ρ²) ε, averaged over seeds.
        let rho: f64 = 0.5;
        let mut sum = 0.0;
        let mut passed = 0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z: Vec<f64> = (0..500).map(|_| rng.sample(StandardNormal)).collect();
            let u: Vec<f64> =
                z.iter().map(|&z| rho * z + (1.0 - rho * rho).sqrt() * rng.sample::<f64, _>(StandardNormal)).collect();
            let rep = correlation_report("p", &rates_from(&z, &u, &u), 0.05).unwrap();
            sum += rep.corr1.r.unwrap();
            passed += rep.corr1.passed as usize;
        }
        let mean = sum / 20.0;
        assert!((0.42..=0.58).contains(&mean), "{mean}");
        assert_eq!(passed, 20);
    }

    #[test]
    fn independent_noise_rarely_significant() {
        let mut within = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let x: Vec<f64> = (0..50).map(|_| rng.sample(StandardNormal)).collect();
            let y: Vec<f64> = (0..50).map(|_| rng.sample(StandardNormal)).collect();
            let rep = correlation_report("n", &rates_from(&x, &y, &y), 0.05).unwrap();
            // |r| below the bound implied by t_crit: r* = t/√(t² + n − 2).
            let t = rep.corr1.t_crit.unwrap();
            let bound = t / (t * t + 48.0).sqrt();
            within += (rep.corr1.r.unwrap().abs() < bound) as usize;
        }
        assert!(within >= 90, "{within}");
    }

    #[test]
    fn stability_examples() {
        let s = StabilitySummary::from_counts(495, 380, 28).unwrap();
        assert_abs_diff_eq!(s.stability_index, 87.0 / 495.0, epsilon = 1e-15);
        assert!((s.stability_index - 0.1758).abs() < 5e-5);
        assert!((s.pass_rate - 0.8242).abs() < 5e-5);
        assert!((s.pre_refinement_abnormal_share - 0.2323).abs() < 5e-5);

        let good = vec![fit(ModelKind::Bessel0, true, FitStage::Primary); 4];
        assert_eq!(stability_index(&good).unwrap(), 0.0);
        let bad = vec![
            fit(ModelKind::Unfit, false, FitStage::Kummer),
            fit(ModelKind::Bessel0TwoPeak, true, FitStage::TwoPeak),
            fit(ModelKind::Kummer1, true, FitStage::Kummer),
            fit(ModelKind::Degenerate, false, FitStage::Primary),
        ];
        assert_eq!(stability_index(&bad).unwrap(), 1.0);
        let s = StabilitySummary::from_fits(&bad).unwrap();
        assert_eq!((s.two_peak, s.kummer, s.unfit, s.degenerate), (1, 1, 1, 1));
        assert_eq!(stability_index(&[]), Err(Error::EmptyInput));

        let mixed =
            vec![fit(ModelKind::Bessel0, true, FitStage::Primary), fit(ModelKind::Bessel0, true, FitStage::Refined)];
        let s = StabilitySummary::from_fits(&mixed).unwrap();
        assert_eq!((s.first_pass, s.refined_pass), (1, 1));
        assert_eq!(s.pre_refinement_abnormal_share, 0.5);
    }

    #[test]
    fn rates_csv_shape() {
        let mut out = Vec::new();
        write_rates_csv(&rates_from(&[0.5], &[0.25], &[-0.125]), &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "day,ret,dint,damt\n2007-01-02,0.5,0.25,-0.125\n");
    }

    proptest! {
        #[test]
        fn scaling_invariance(
            ps in prop::collection::vec(1.0f64..20.0, 3..30),
            vs in prop::collection::vec(1.0f64..1e6, 30),
            kv in 0.01f64..100.0, kp in 0.01f64..100.0,
        ) {
            let base: Vec<_> = ps.iter().zip(&vs).enumerate()
                .map(|(i, (&p, &v))| point(i as u32, p, v, p * v)).collect();
            let scaled: Vec<_> = base.iter()
                .map(|b| DailySeriesPoint {
                    equilibrium_price: b.equilibrium_price * kp,
                    total_volume: b.total_volume * kv,
                    total_amount: b.total_amount * kp * kv,
                    ..*b
                })
                .collect();
            let a = rate_series(&base, ReturnKind::Simple).unwrap();
            let b = rate_series(&scaled, ReturnKind::Simple).unwrap();
            prop_assert_eq!(a.len(), base.len() - 1);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x.mean_return_rate - y.mean_return_rate).abs() < 1e-12 * (1.0 + x.mean_return_rate.abs()));
                prop_assert!((x.intensity_change_rate - y.intensity_change_rate).abs() < 1e-12 * (1.0 + x.intensity_change_rate.abs()));
                prop_assert!((x.amount_change_rate - y.amount_change_rate).abs() < 1e-11 * (1.0 + x.amount_change_rate.abs()));
            }
        }

        #[test]
        fn stability_monotone(kinds in prop::collection::vec(0u8..4, 1..40), flip in 0usize..40) {
            let mk = |k: u8| match k {
                0 => fit(ModelKind::Bessel0, true, FitStage::Primary),
                1 => fit(ModelKind::Bessel0, true, FitStage::Refined),
                2 => fit(ModelKind::Kummer1, true, FitStage::Kummer),
                _ => fit(ModelKind::Unfit, false, FitStage::Kummer),
            };
            let mut fits: Vec<_> = kinds.iter().map(|&k| mk(k)).collect();
            let before = stability_index(&fits).unwrap();
            prop_assert!((0.0..=1.0).contains(&before));
            let i = flip % fits.len();
            fits[i] = mk(3);
            prop_assert!(stability_index(&fits).unwrap() >= before);
        }
    }
}
