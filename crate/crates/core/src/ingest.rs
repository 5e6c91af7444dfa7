//! Tick parsing, price-grid snapping and per-day volume-price histograms.
//!
//! Prices are held as integer thousandths of a currency unit so that grid
//! snapping and the transaction-amount aggregate are exact.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{NaiveDate, NaiveTime, Timelike};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Price in integer thousandths of a currency unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Price(u64);

impl Price {
    pub const fn from_milli(milli: u64) -> Self {
        Price(milli)
    }

    pub const fn milli(self) -> u64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    /// Nearest representable price to a decimal value (for synthetic grids and
    /// deserialization).
    pub fn from_f64(value: f64) -> Self {
        Price((value * 1000.0).round().max(0.0) as u64)
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:03}", self.0 / 1000, self.0 % 1000)
    }
}

impl FromStr for Price {
    type Err = String;

    /// Parses a positive decimal with at most three fraction digits.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s.starts_with('-') {
            return Err(format!("negative price {s:?}"));
        }
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err("empty price".into());
        }
        if frac_part.len() > 3 {
            return Err(format!("price {s:?} has more than 3 decimal places"));
        }
        let all_digits = |t: &str| t.bytes().all(|b| b.is_ascii_digit());
        if !all_digits(int_part) || !all_digits(frac_part) {
            return Err(format!("invalid price {s:?}"));
        }
        let int: u64 =
            if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| format!("price {s:?} out of range"))? };
        let mut frac: u64 = if frac_part.is_empty() { 0 } else { frac_part.parse().unwrap() };
        for _ in frac_part.len()..3 {
            frac *= 10;
        }
        int.checked_mul(1000)
            .and_then(|v| v.checked_add(frac))
            .map(Price)
            .ok_or_else(|| format!("price {s:?} out of range"))
    }
}

impl Serialize for Price {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.to_f64())
    }
}

impl<'de> Deserialize<'de> for Price {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let v = f64::deserialize(deserializer)?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(serde::de::Error::custom(format!("invalid price {v}")));
        }
        Ok(Price::from_f64(v))
    }
}

/// Intraday time in milliseconds since midnight. Only used for ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestamp(pub u32);

impl Timestamp {
    pub fn parse(s: &str) -> Option<Self> {
        let t = NaiveTime::parse_from_str(s.trim(), "%H:%M:%S%.f").ok()?;
        Some(Timestamp(t.num_seconds_from_midnight() * 1000 + t.nanosecond() / 1_000_000))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ms = self.0;
        write!(f, "{:02}:{:02}:{:02}.{:03}", ms / 3_600_000, (ms / 60_000) % 60, (ms / 1000) % 60, ms % 1000)
    }
}

/// One trade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickRecord {
    pub day: NaiveDate,
    pub timestamp: Timestamp,
    pub price: Price,
    pub volume: u64,
}

/// All trades of one day, sorted by timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct DayTicks {
    pub day: NaiveDate,
    pub ticks: Vec<TickRecord>,
}

/// Price-snapping rule used to build a histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GridMode {
    /// Round half-up to whole cents.
    #[serde(rename = "2dp")]
    TwoDecimal,
    /// Snap the third decimal onto the 0.005 grid (0-2 down, 3-7 to 5, 8-9 up).
    #[serde(rename = "halfcent")]
    HalfCent,
}

impl GridMode {
    pub fn tick(self) -> Price {
        match self {
            GridMode::TwoDecimal => Price(10),
            GridMode::HalfCent => Price(5),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            GridMode::TwoDecimal => "2dp",
            GridMode::HalfCent => "halfcent",
        }
    }
}

impl fmt::Display for GridMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Snap a price onto the grid of `mode`.
pub fn snap_price(price: Price, mode: GridMode) -> Price {
    let v = price.0;
    let d = v % 10;
    let base = v - d;
    Price(match mode {
        GridMode::TwoDecimal => {
            if d >= 5 {
                base + 10
            } else {
                base
            }
        }
        GridMode::HalfCent => match d {
            0..=2 => base,
            3..=7 => base + 5,
            _ => base + 10,
        },
    })
}

/// Normalized volume-versus-price distribution of one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeHistogram {
    day: NaiveDate,
    grid_mode: GridMode,
    prices: Vec<Price>,
    volumes: Vec<u64>,
    probabilities: Vec<f64>,
    total_volume: u64,
}

impl VolumeHistogram {
    /// Builds a histogram from already-snapped `(price, volume)` bins. Bins
    /// with equal prices are merged and zero-volume bins dropped.
    pub fn from_bins(
        day: NaiveDate,
        grid_mode: GridMode,
        bins: impl IntoIterator<Item = (Price, u64)>,
    ) -> Result<Self> {
        let mut acc: BTreeMap<Price, u64> = BTreeMap::new();
        for (price, volume) in bins {
            if volume > 0 {
                *acc.entry(price).or_insert(0) += volume;
            }
        }
        if acc.is_empty() {
            return Err(Error::DegenerateDay(format!("{day}: no traded volume")));
        }
        let total_volume: u64 = acc.values().sum();
        let (prices, volumes): (Vec<Price>, Vec<u64>) = acc.into_iter().unzip();
        let probabilities = volumes.iter().map(|&v| v as f64 / total_volume as f64).collect();
        Ok(VolumeHistogram { day, grid_mode, prices, volumes, probabilities, total_volume })
    }

    pub fn day(&self) -> NaiveDate {
        self.day
    }

    pub fn grid_mode(&self) -> GridMode {
        self.grid_mode
    }

    pub fn prices(&self) -> &[Price] {
        &self.prices
    }

    pub fn volumes(&self) -> &[u64] {
        &self.volumes
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn total_volume(&self) -> u64 {
        self.total_volume
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn prices_f64(&self) -> Vec<f64> {
        self.prices.iter().map(|p| p.to_f64()).collect()
    }

    pub fn min_price(&self) -> Price {
        self.prices[0]
    }

    pub fn max_price(&self) -> Price {
        self.prices[self.prices.len() - 1]
    }

    /// Writes the `price,volume,probability` export.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::io("histogram csv", e);
        w.write_record(["price", "volume", "probability"]).map_err(io)?;
        for i in 0..self.len() {
            w.write_record([
                self.prices[i].to_string(),
                self.volumes[i].to_string(),
                self.probabilities[i].to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::io("histogram csv", e))
    }

    /// Reads a `price,volume,probability` export. Probabilities are
    /// recomputed from the integer volumes.
    pub fn read_csv<R: Read>(day: NaiveDate, grid_mode: GridMode, reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut bins = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::Parse {
                line: e.position().map(|p| p.line()).unwrap_or(0),
                message: e.to_string(),
            })?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let parse_err = |m: String| Error::Parse { line, message: m };
            let price: Price = rec.get(0).unwrap_or("").parse().map_err(parse_err)?;
            let volume: u64 = rec
                .get(1)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|e| Error::Parse { line, message: format!("volume: {e}") })?;
            bins.push((price, volume));
        }
        if bins.is_empty() {
            return Err(Error::EmptyInput);
        }
        Self::from_bins(day, grid_mode, bins)
    }
}

/// Daily aggregates used by the correlation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyMetrics {
    pub day: NaiveDate,
    /// V, shares.
    pub total_volume: u64,
    /// M = Σ p·v in thousandths of a currency unit (exact).
    pub total_amount_milli: u128,
    /// p̄ = M / V.
    pub weighted_mean_price: f64,
    /// Number of distinct traded (pre-snap) prices.
    pub distinct_price_count: usize,
    pub min_price: Price,
    pub max_price: Price,
}

impl DailyMetrics {
    pub fn total_amount(&self) -> f64 {
        self.total_amount_milli as f64 / 1000.0
    }
}

const TICK_HEADER: [&str; 4] = ["day", "timestamp", "price", "volume"];

/// Parses tick CSV (`day,timestamp,price,volume`) into days sorted by date,
/// each sorted by timestamp.
pub fn parse_ticks<R: Read>(reader: R) -> Result<Vec<DayTicks>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = match r.headers() {
        Ok(h) => h.clone(),
        Err(e) => {
            return Err(Error::Parse { line: 1, message: e.to_string() });
        }
    };
    if headers.is_empty() || (headers.len() == 1 && headers.get(0) == Some("")) {
        return Err(Error::EmptyInput);
    }
    if headers.iter().collect::<Vec<_>>() != TICK_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {:?}, found {:?}", TICK_HEADER.join(","), headers),
        });
    }

    let mut by_day: BTreeMap<NaiveDate, Vec<TickRecord>> = BTreeMap::new();
    for rec in r.records() {
        let rec = rec
            .map_err(|e| Error::Parse { line: e.position().map(|p| p.line()).unwrap_or(0), message: e.to_string() })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| rec.get(i).unwrap_or("");
        let perr = |message: String| Error::Parse { line, message };

        let day =
            NaiveDate::parse_from_str(field(0), "%Y-%m-%d").map_err(|e| perr(format!("day {:?}: {e}", field(0))))?;
        let timestamp = Timestamp::parse(field(1)).ok_or_else(|| perr(format!("timestamp {:?}", field(1))))?;
        let price_str = field(2);
        let price: Price = if price_str.starts_with('-') {
            return Err(Error::Domain { line: Some(line), message: format!("price {price_str} ≤ 0") });
        } else {
            price_str.parse().map_err(perr)?
        };
        if price.milli() == 0 {
            return Err(Error::Domain { line: Some(line), message: "price must be > 0".into() });
        }
        let volume: i128 = field(3).parse().map_err(|e| perr(format!("volume {:?}: {e}", field(3))))?;
        if volume < 0 {
            return Err(Error::Domain { line: Some(line), message: format!("negative volume {volume}") });
        }
        let volume = u64::try_from(volume).map_err(|_| perr(format!("volume {volume} out of range")))?;
        by_day.entry(day).or_default().push(TickRecord { day, timestamp, price, volume });
    }
    if by_day.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(by_day
        .into_iter()
        .map(|(day, mut ticks)| {
            ticks.sort_by_key(|t| t.timestamp);
            DayTicks { day, ticks }
        })
        .collect())
}

/// Writes ticks in the same CSV schema [`parse_ticks`] reads.
pub fn write_ticks_csv<'a, W: Write>(days: impl IntoIterator<Item = &'a DayTicks>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::io("tick csv", e);
    w.write_record(TICK_HEADER).map_err(io)?;
    for day in days {
        for t in &day.ticks {
            w.write_record([
                t.day.format("%Y-%m-%d").to_string(),
                t.timestamp.to_string(),
                t.price.to_string(),
                t.volume.to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::io("tick csv", e))
}

/// Accumulates one day's volume on the grid of `mode`.
pub fn build_histogram(records: &[TickRecord], mode: GridMode) -> Result<VolumeHistogram> {
    let Some(first) = records.first() else {
        return Err(Error::DegenerateDay("no records".into()));
    };
    VolumeHistogram::from_bins(first.day, mode, records.iter().map(|t| (snap_price(t.price, mode), t.volume)))
}

/// Totals for one day, computed from the original (pre-snap) prices.
pub fn day_summary(records: &[TickRecord]) -> Result<DailyMetrics> {
    let Some(first) = records.first() else {
        return Err(Error::DegenerateDay("no records".into()));
    };
    let mut total_volume: u64 = 0;
    let mut total_amount_milli: u128 = 0;
    let mut distinct = std::collections::BTreeSet::new();
    for t in records.iter().filter(|t| t.volume > 0) {
        total_volume += t.volume;
        total_amount_milli += t.price.milli() as u128 * t.volume as u128;
        distinct.insert(t.price);
    }
    if total_volume == 0 {
        return Err(Error::DegenerateDay(format!("{}: no traded volume", first.day)));
    }
    let (min_price, max_price) = (*distinct.first().unwrap(), *distinct.last().unwrap());
    // p̄ in currency units; clamp guards the last-ulp rounding of the division.
    let mean = (total_amount_milli as f64 / total_volume as f64 / 1000.0).clamp(min_price.to_f64(), max_price.to_f64());
    Ok(DailyMetrics {
        day: first.day,
        total_volume,
        total_amount_milli,
        weighted_mean_price: mean,
        distinct_price_count: distinct.len(),
        min_price,
        max_price,
    })
}

const METRICS_HEADER: [&str; 7] =
    ["day", "total_volume", "total_amount", "weighted_mean_price", "distinct_price_count", "min_price", "max_price"];

pub fn write_metrics_csv<'a, W: Write>(metrics: impl IntoIterator<Item = &'a DailyMetrics>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::io("metrics csv", e);
    w.write_record(METRICS_HEADER).map_err(io)?;
    for m in metrics {
        w.write_record([
            m.day.format("%Y-%m-%d").to_string(),
            m.total_volume.to_string(),
            format!("{}.{:03}", m.total_amount_milli / 1000, m.total_amount_milli % 1000),
            m.weighted_mean_price.to_string(),
            m.distinct_price_count.to_string(),
            m.min_price.to_string(),
            m.max_price.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io("metrics csv", e))
}

pub fn read_metrics_csv<R: Read>(reader: R) -> Result<Vec<DailyMetrics>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec
            .map_err(|e| Error::Parse { line: e.position().map(|p| p.line()).unwrap_or(0), message: e.to_string() })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let f = |i: usize| rec.get(i).unwrap_or("").trim();
        let perr = |what: &str| Error::Parse { line, message: format!("invalid {what}") };
        let day = NaiveDate::parse_from_str(f(0), "%Y-%m-%d").map_err(|_| perr("day"))?;
        let total_volume: u64 = f(1).parse().map_err(|_| perr("total_volume"))?;
        let amount: Price = f(2).parse().map_err(|_| perr("total_amount"))?;
        let distinct_price_count = f(4).parse().map_err(|_| perr("distinct_price_count"))?;
        let min_price: Price = f(5).parse().map_err(|_| perr("min_price"))?;
        let max_price: Price = f(6).parse().map_err(|_| perr("max_price"))?;
        if total_volume == 0 {
            return Err(Error::Domain { line: Some(line), message: "zero total volume".into() });
        }
        let total_amount_milli = amount.milli() as u128;
        let weighted_mean_price =
            (total_amount_milli as f64 / total_volume as f64 / 1000.0).clamp(min_price.to_f64(), max_price.to_f64());
        out.push(DailyMetrics {
            day,
            total_volume,
            total_amount_milli,
            weighted_mean_price,
            distinct_price_count,
            min_price,
            max_price,
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> Price {
        s.parse().unwrap()
    }

    fn day(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn tick(d: &str, price: &str, volume: u64) -> TickRecord {
        TickRecord { day: day(d), timestamp: Timestamp(0), price: p(price), volume }
    }

    #[test]
    fn price_parsing() {
        assert_eq!(p("3.142").milli(), 3142);
        assert_eq!(p("3.1").milli(), 3100);
        assert_eq!(p("10").milli(), 10_000);
        assert_eq!(p(".5").milli(), 500);
        assert!("3.1415".parse::<Price>().is_err());
        assert!("abc".parse::<Price>().is_err());
        assert!("-1.0".parse::<Price>().is_err());
        assert_eq!(p("3.140").to_string(), "3.140");
    }

    #[test]
    fn timestamp_round_trip() {
        let t = Timestamp::parse("09:30:01.250").unwrap();
        assert_eq!(t.0, (9 * 3600 + 30 * 60 + 1) * 1000 + 250);
        assert_eq!(t.to_string(), "09:30:01.250");
    }

    #[test]
    fn snap_examples() {
        assert_eq!(snap_price(p("3.142"), GridMode::TwoDecimal), p("3.14"));
        assert_eq!(snap_price(p("3.145"), GridMode::TwoDecimal), p("3.15"));
        assert_eq!(snap_price(p("3.143"), GridMode::HalfCent), p("3.145"));
        assert_eq!(snap_price(p("3.148"), GridMode::HalfCent), p("3.150"));
        assert_eq!(snap_price(p("3.142"), GridMode::HalfCent), p("3.140"));
        assert_eq!(snap_price(p("3.147"), GridMode::HalfCent), p("3.145"));
        assert_eq!(snap_price(p("3.199"), GridMode::HalfCent), p("3.200"));
    }

    #[test]
    fn parse_groups_and_sorts() {
        let csv = "day,timestamp,price,volume\n\
                   2008-01-02,09:31:00.000,3.142,100\n\
                   2008-01-02,09:30:00.000,3.150,200\n\
                   2008-01-02,09:32:00.000,3.141,300\n";
        let days = parse_ticks(csv.as_bytes()).unwrap();
        assert_eq!(days.len(), 1);
        assert_eq!(days[0].ticks.len(), 3);
        assert_eq!(days[0].ticks[0].price, p("3.150"));
        assert!(days[0].ticks.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));

        let csv2 = "day,timestamp,price,volume\n\
                    2008-01-03,09:30:00.000,3.1,1\n\
                    2008-01-02,09:30:00.000,3.2,1\n";
        let days = parse_ticks(csv2.as_bytes()).unwrap();
        assert_eq!(days.len(), 2);
        assert_eq!(days[0].day, day("2008-01-02"));
    }

    #[test]
    fn parse_errors() {
        assert_eq!(parse_ticks("".as_bytes()), Err(Error::EmptyInput));
        assert_eq!(parse_ticks("day,timestamp,price,volume\n".as_bytes()), Err(Error::EmptyInput));
        let neg = "day,timestamp,price,volume\n2008-01-02,09:30:00.000,3.1,10\n2008-01-02,09:30:00.000,3.1,-5\n";
        match parse_ticks(neg.as_bytes()) {
            Err(Error::Domain { line: Some(3), .. }) => {}
            other => panic!("expected domain error at line 3, got {other:?}"),
        }
        let bad = "day,timestamp,price,volume\n2008-01-02,09:30:00.000,abc,10\n";
        assert!(matches!(parse_ticks(bad.as_bytes()), Err(Error::Parse { line: 2, .. })));
        let bad_header = "date,time,p,v\n2008-01-02,09:30:00.000,3.1,10\n";
        assert!(matches!(parse_ticks(bad_header.as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn histogram_examples() {
        let ticks = [tick("2008-01-02", "3.14", 5), tick("2008-01-02", "3.14", 6), tick("2008-01-02", "3.14", 7)];
        let h = build_histogram(&ticks, GridMode::TwoDecimal).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h.probabilities(), &[1.0]);
        assert_eq!(h.total_volume(), 18);

        let ticks = [tick("2008-01-02", "3.15", 70), tick("2008-01-02", "3.14", 30)];
        let h = build_histogram(&ticks, GridMode::TwoDecimal).unwrap();
        assert_eq!(h.prices(), &[p("3.14"), p("3.15")]);
        assert_eq!(h.probabilities(), &[0.3, 0.7]);

        assert!(matches!(build_histogram(&[], GridMode::TwoDecimal), Err(Error::DegenerateDay(_))));
        let zero = [tick("2008-01-02", "3.14", 0)];
        assert!(matches!(build_histogram(&zero, GridMode::TwoDecimal), Err(Error::DegenerateDay(_))));
    }

    #[test]
    fn summary_examples() {
        let ticks = [tick("2008-01-02", "10.00", 100), tick("2008-01-02", "11.00", 100)];
        let m = day_summary(&ticks).unwrap();
        assert_eq!(m.total_volume, 200);
        assert_eq!(m.total_amount(), 2100.0);
        assert_eq!(m.weighted_mean_price, 10.5);

        let m = day_summary(&[tick("2008-01-02", "3.417", 9)]).unwrap();
        assert_eq!(m.weighted_mean_price, 3.417);

        let ticks = [tick("2008-01-02", "3.40", 1), tick("2008-01-02", "3.40", 977), tick("2008-01-02", "3.40", 3)];
        assert_eq!(day_summary(&ticks).unwrap().weighted_mean_price, 3.40);
        assert!(day_summary(&[]).is_err());
    }

    #[test]
    fn histogram_csv_round_trip() {
        let ticks = [tick("2008-01-02", "3.15", 70), tick("2008-01-02", "3.14", 30), tick("2008-01-02", "3.17", 1)];
        let h = build_histogram(&ticks, GridMode::TwoDecimal).unwrap();
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("price,volume,probability\n3.140,30,0.29702970297"));
        let back = VolumeHistogram::read_csv(h.day(), h.grid_mode(), buf.as_slice()).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn metrics_csv_round_trip() {
        let ticks = [tick("2008-01-02", "3.153", 70), tick("2008-01-02", "3.141", 31)];
        let m = day_summary(&ticks).unwrap();
        let mut buf = Vec::new();
        write_metrics_csv([&m], &mut buf).unwrap();
        assert_eq!(read_metrics_csv(buf.as_slice()).unwrap(), vec![m]);
    }

    fn arb_ticks() -> impl Strategy<Value = Vec<TickRecord>> {
        prop::collection::vec((1u64..200_000, 0u64..10_000), 1..60).prop_map(|v| {
            v.into_iter()
                .map(|(milli, vol)| TickRecord {
                    day: NaiveDate::from_ymd_opt(2008, 1, 2).unwrap(),
                    timestamp: Timestamp(0),
                    price: Price::from_milli(milli),
                    volume: vol + 1,
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn snap_is_idempotent_and_on_grid(milli in 1u64..10_000_000) {
            for mode in [GridMode::TwoDecimal, GridMode::HalfCent] {
                let s = snap_price(Price::from_milli(milli), mode);
                prop_assert_eq!(snap_price(s, mode), s);
                prop_assert_eq!(s.milli() % mode.tick().milli(), 0);
                prop_assert!(s.milli().abs_diff(milli) <= 5);
            }
        }

        #[test]
        fn histogram_invariants(ticks in arb_ticks(), rot in 0usize..60) {
            for mode in [GridMode::TwoDecimal, GridMode::HalfCent] {
                let h = build_histogram(&ticks, mode).unwrap();
                let sum: f64 = h.probabilities().iter().sum();
                prop_assert!((sum - 1.0).abs() <= 1e-12);
                prop_assert!(h.probabilities().iter().all(|&q| q >= 0.0));
                prop_assert!(h.prices().windows(2).all(|w| w[0] < w[1]));
                prop_assert_eq!(h.total_volume(), ticks.iter().map(|t| t.volume).sum::<u64>());
                let lo = ticks.iter().map(|t| t.price.milli()).min().unwrap();
                let hi = ticks.iter().map(|t| t.price.milli()).max().unwrap();
                prop_assert!(h.min_price().milli() + 10 >= lo);
                prop_assert!(h.max_price().milli() <= hi + 10);

                let mut permuted = ticks.clone();
                let n = permuted.len();
                permuted.rotate_left(rot % n);
                permuted.reverse();
                prop_assert_eq!(build_histogram(&permuted, mode).unwrap().total_volume(), h.total_volume());
            }
            let m = day_summary(&ticks).unwrap();
            prop_assert!(m.min_price.to_f64() <= m.weighted_mean_price);
            prop_assert!(m.weighted_mean_price <= m.max_price.to_f64());
            prop_assert!(m.total_amount() > 0.0);
        }
    }
}
