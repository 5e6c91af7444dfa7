//! Volume-price probability-wave analysis of high-frequency tick data.
//!
//! The crate turns per-trade records into normalized daily volume-versus-price
//! distributions, fits them with zero-order Bessel and first-order Kummer
//! eigenfunction models, classifies each day through a significance cascade,
//! and correlates day-over-day equilibrium-price returns with the change in
//! traded volume (the trading conditioning intensity).
//!
//! Module map:
//!
//! - [`ingest`]: tick CSV parsing, price-grid snapping, histograms, daily metrics.
//! - [`specfun`]: J0, regularized incomplete beta, t and F critical values.
//! - [`stats`]: R², F statistic, critical R², Pearson r and its t test.
//! - [`wavefit`]: the three wave models, damped least squares, the fit cascade.
//! - [`conditioning`]: rate series, period splits, correlation report, stability index.
//! - [`synth`]: seeded synthetic ticks and planted-correlation corpora.
//! - [`pipeline`]: the ingest → fit → analyze chain and its on-disk artifacts.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conditioning;
mod error;
pub mod ingest;
pub mod pipeline;
pub mod specfun;
pub mod stats;
pub mod synth;
pub mod wavefit;

pub use error::{Error, Result};
pub use ingest::{DailyMetrics, DayTicks, GridMode, Price, TickRecord, VolumeHistogram};
pub use wavefit::{ClassifiedFit, FitConfig, ModelKind, ModelParams};
