//! Starting points for the least-squares fits.

use super::{BesselParams, KummerParams, ModelKind, ModelParams, TwoPeakParams};
use crate::ingest::VolumeHistogram;
use crate::specfun::{j0, J0_ZEROS};
use crate::{Error, Result};

/// First index of the maximum (ties go to the lower price).
pub(crate) fn argmax(ys: &[f64]) -> usize {
    let mut best = 0;
    for (i, &y) in ys.iter().enumerate() {
        if y > ys[best] {
            best = i;
        }
    }
    best
}

/// Distance from `p0` to the farthest grid point, at least one tick.
fn half_width(xs: &[f64], p0: f64, tick: f64) -> f64 {
    (p0 - xs[0]).max(xs[xs.len() - 1] - p0).max(tick)
}

pub(crate) fn single_guess(kind: ModelKind, xs: &[f64], ys: &[f64], p0: f64, tick: f64) -> ModelParams {
    let c = ys.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let hw = half_width(xs, p0, tick);
    match kind {
        ModelKind::Bessel0 => ModelParams::Bessel0(BesselParams { c, omega: J0_ZEROS[0] / hw, p0 }),
        ModelKind::Kummer1 => ModelParams::Kummer1(KummerParams { c, sqrt_a: 1.0 / hw, p0 }),
        _ => unreachable!("single_guess for {kind}"),
    }
}

/// Splits the points at the deepest valley between the two largest local
/// maxima. Returns the index where the right side starts.
pub(crate) fn valley_split(ys: &[f64]) -> usize {
    let n = ys.len();
    let mut peaks: Vec<usize> =
        (0..n).filter(|&i| (i == 0 || ys[i] > ys[i - 1]) && (i + 1 == n || ys[i] >= ys[i + 1])).collect();
    // Largest first; stable sort keeps lower prices first among ties.
    peaks.sort_by(|&a, &b| ys[b].partial_cmp(&ys[a]).unwrap());
    let first = peaks[0];
    let second = match peaks.get(1) {
        Some(&s) => s,
        // Unimodal: pair the peak with the largest point at least two
        // indices away.
        None => (0..n)
            .filter(|&i| i.abs_diff(first) >= 2)
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if ys[b] >= ys[i] => Some(b),
                _ => Some(i),
            })
            .unwrap_or(if first + 1 < n { first + 1 } else { first.saturating_sub(1) }),
    };
    let (lo, hi) = (first.min(second), first.max(second));
    let mut valley = lo;
    for i in lo..=hi {
        if ys[i] < ys[valley] {
            valley = i;
        }
    }
    // Right side starts after the valley; both sides keep at least one point.
    (valley + 1).clamp(1, n - 1)
}

/// Initial parameters for `kind` from the histogram alone.
///
/// Single-peak models center on the highest bin with C at its probability and
/// the rate set so the first zero lands on the farthest grid price. The
/// two-peak model applies the same rule to each side of the deepest valley
/// between the two largest local maxima.
pub fn init_guess(hist: &VolumeHistogram, kind: ModelKind) -> Result<ModelParams> {
    if hist.len() < 4 {
        return Err(Error::DegenerateDay(format!("{}: only {} distinct prices", hist.day(), hist.len())));
    }
    let xs = hist.prices_f64();
    let ys = hist.probabilities();
    let tick = hist.grid_mode().tick().to_f64();
    match kind {
        ModelKind::Bessel0 | ModelKind::Kummer1 => Ok(single_guess(kind, &xs, ys, xs[argmax(ys)], tick)),
        ModelKind::Bessel0TwoPeak => {
            let split = valley_split(ys);
            Ok(ModelParams::Bessel0TwoPeak(two_peak_from_sides(&xs, ys, split, tick)))
        }
        ModelKind::Unfit | ModelKind::Degenerate => Err(Error::domain(format!("no initial guess for {kind}"))),
    }
}

pub(crate) fn two_peak_from_sides(xs: &[f64], ys: &[f64], split: usize, tick: f64) -> TwoPeakParams {
    let side = |xs: &[f64], ys: &[f64]| match single_guess(ModelKind::Bessel0, xs, ys, xs[argmax(ys)], tick) {
        ModelParams::Bessel0(b) => b,
        _ => unreachable!(),
    };
    TwoPeakParams { left: side(&xs[..split], &ys[..split]), right: side(&xs[split..], &ys[split..]) }
}

/// Shape of a unit-scale single-peak model at distance `d` from p0.
#[inline]
fn unit_shape(kind: ModelKind, rate: f64, d: f64) -> f64 {
    match kind {
        ModelKind::Bessel0 => j0(rate * d).abs(),
        ModelKind::Kummer1 => {
            let z = rate * d.abs();
            (-z).exp() * (1.0 - 2.0 * z).abs()
        }
        _ => unreachable!(),
    }
}

/// Scans the rate constant on a log grid with p0 fixed, solving C in closed
/// form, and returns up to `keep` starts at the lowest local minima of the
/// profiled SSR. The grid runs from "first zero at the farthest price" to
/// "first zero half a tick away".
pub(crate) fn profile_starts(
    kind: ModelKind,
    xs: &[f64],
    ys: &[f64],
    p0: f64,
    tick: f64,
    points: usize,
    keep: usize,
) -> Vec<ModelParams> {
    if points < 2 {
        return Vec::new();
    }
    let zero_at_unit = match kind {
        ModelKind::Bessel0 => J0_ZEROS[0],
        ModelKind::Kummer1 => 0.5,
        _ => unreachable!(),
    };
    let far = half_width(xs, p0, tick);
    let near = 0.5 * tick;
    let (r_lo, r_hi) = (zero_at_unit / far, zero_at_unit / near);
    let ratio = (r_hi / r_lo).ln() / (points - 1) as f64;
    let profile: Vec<(f64, f64, f64)> = (0..points)
        .map(|i| {
            let rate = r_lo * (ratio * i as f64).exp();
            let (mut sgy, mut sgg) = (0.0, 0.0);
            for (&x, &y) in xs.iter().zip(ys) {
                let g = unit_shape(kind, rate, x - p0);
                sgy += g * y;
                sgg += g * g;
            }
            let c = if sgg > 0.0 { (sgy / sgg).max(f64::MIN_POSITIVE) } else { f64::MIN_POSITIVE };
            let ssr: f64 = xs.iter().zip(ys).map(|(&x, &y)| (y - c * unit_shape(kind, rate, x - p0)).powi(2)).sum();
            (rate, c, ssr)
        })
        .collect();
    let mut minima: Vec<&(f64, f64, f64)> = profile
        .iter()
        .enumerate()
        .filter(|&(i, v)| (i == 0 || v.2 <= profile[i - 1].2) && (i + 1 == profile.len() || v.2 <= profile[i + 1].2))
        .map(|(_, v)| v)
        .collect();
    minima.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap());
    minima
        .into_iter()
        .take(keep)
        .map(|&(rate, c, _)| match kind {
            ModelKind::Bessel0 => ModelParams::Bessel0(BesselParams { c, omega: rate, p0 }),
            _ => ModelParams::Kummer1(KummerParams { c, sqrt_a: rate, p0 }),
        })
        .collect()
}

#[cfg(test)]
#[allow(clippy::approx_constant)] // 3.14 is a price
mod tests {
    use super::*;
    use crate::ingest::{GridMode, Price};
    use chrono::NaiveDate;

    fn hist(bins: &[(u64, u64)]) -> VolumeHistogram {
        VolumeHistogram::from_bins(
            NaiveDate::from_ymd_opt(2008, 1, 2).unwrap(),
            GridMode::TwoDecimal,
            bins.iter().map(|&(p, v)| (Price::from_milli(p), v)),
        )
        .unwrap()
    }

    #[test]
    fn bessel_guess_at_argmax() {
        let h = hist(&[(3100, 5), (3110, 9), (3120, 20), (3130, 40), (3140, 70), (3150, 30)]);
        let ModelParams::Bessel0(b) = init_guess(&h, ModelKind::Bessel0).unwrap() else { panic!() };
        assert_eq!(b.p0, 3.14);
        assert_eq!(b.c, 70.0 / 174.0);
        assert!((b.omega - J0_ZEROS[0] / 0.04).abs() < 1e-9);
        let ModelParams::Kummer1(k) = init_guess(&h, ModelKind::Kummer1).unwrap() else { panic!() };
        assert!((k.sqrt_a - 25.0).abs() < 1e-9);
    }

    #[test]
    fn ties_go_to_lower_price() {
        let h = hist(&[(3100, 5), (3110, 50), (3120, 20), (3130, 50), (3140, 7)]);
        assert_eq!(init_guess(&h, ModelKind::Bessel0).unwrap().p0(), Some(3.11));
    }

    #[test]
    fn too_few_prices() {
        let h = hist(&[(3100, 5), (3110, 50), (3120, 20)]);
        assert!(matches!(init_guess(&h, ModelKind::Bessel0), Err(Error::DegenerateDay(_))));
        let h = hist(&[(3100, 5), (3110, 50), (3120, 20), (3130, 1)]);
        assert!(init_guess(&h, ModelKind::Unfit).is_err());
    }

    #[test]
    fn two_peak_split_at_valley() {
        let h = hist(&[
            (3100, 2),
            (3110, 10),
            (3120, 30),
            (3130, 10),
            (3140, 1),
            (3150, 3),
            (3160, 25),
            (3170, 40),
            (3180, 5),
        ]);
        assert_eq!(valley_split(h.probabilities()), 5);
        let ModelParams::Bessel0TwoPeak(t) = init_guess(&h, ModelKind::Bessel0TwoPeak).unwrap() else { panic!() };
        assert_eq!(t.left.p0, 3.12);
        assert_eq!(t.right.p0, 3.17);
    }

    #[test]
    fn profile_finds_true_rate() {
        let truth = BesselParams { c: 0.2, omega: 80.0, p0: 3.5 };
        let xs: Vec<f64> = (0..=40).map(|i| 3.3 + i as f64 * 0.01).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| super::super::model_bessel0(x, &truth)).collect();
        let starts = profile_starts(ModelKind::Bessel0, &xs, &ys, 3.5, 0.01, 48, 2);
        let ModelParams::Bessel0(best) = starts[0] else { panic!() };
        assert!((best.omega / 80.0 - 1.0).abs() < 0.05, "{best:?}");
    }
}
