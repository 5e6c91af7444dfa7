use super::{BesselParams, KummerParams, ModelKind, ModelParams, TwoPeakParams};
use crate::specfun::j0;

pub fn model_bessel0(p: f64, params: &BesselParams) -> f64 {
    params.c * j0(params.omega * (p - params.p0)).abs()
}

pub fn model_bessel0_two(p: f64, params: &TwoPeakParams) -> f64 {
    model_bessel0(p, &params.left) + model_bessel0(p, &params.right)
}

pub fn model_kummer1(p: f64, params: &KummerParams) -> f64 {
    let d = params.sqrt_a * (p - params.p0).abs();
    params.c * (-d).exp() * (1.0 - 2.0 * d).abs()
}

// Solver coordinates: positive scale parameters in log space, prices as-is.
// Bessel0 / Kummer1: [ln C, ln rate, p0]
// TwoPeak:           [ln C1, ln ω1, p01, ln C2, ln ω2, p02]

pub(crate) fn n_params(kind: ModelKind) -> usize {
    match kind {
        ModelKind::Bessel0TwoPeak => 6,
        _ => 3,
    }
}

pub(crate) fn pack(params: &ModelParams) -> Vec<f64> {
    match params {
        ModelParams::Bessel0(b) => vec![b.c.ln(), b.omega.ln(), b.p0],
        ModelParams::Kummer1(k) => vec![k.c.ln(), k.sqrt_a.ln(), k.p0],
        ModelParams::Bessel0TwoPeak(t) => {
            vec![t.left.c.ln(), t.left.omega.ln(), t.left.p0, t.right.c.ln(), t.right.omega.ln(), t.right.p0]
        }
    }
}

pub(crate) fn unpack(kind: ModelKind, theta: &[f64]) -> ModelParams {
    let bessel = |t: &[f64]| BesselParams { c: t[0].exp(), omega: t[1].exp(), p0: t[2] };
    match kind {
        ModelKind::Bessel0 => ModelParams::Bessel0(bessel(theta)),
        ModelKind::Kummer1 => {
            ModelParams::Kummer1(KummerParams { c: theta[0].exp(), sqrt_a: theta[1].exp(), p0: theta[2] })
        }
        ModelKind::Bessel0TwoPeak => {
            ModelParams::Bessel0TwoPeak(TwoPeakParams { left: bessel(&theta[..3]), right: bessel(&theta[3..]) })
        }
        ModelKind::Unfit | ModelKind::Degenerate => unreachable!("no model for {kind}"),
    }
}

/// Model value straight from solver coordinates.
#[inline]
pub(crate) fn eval_internal(kind: ModelKind, theta: &[f64], p: f64) -> f64 {
    #[inline]
    fn bessel(t: &[f64], p: f64) -> f64 {
        t[0].exp() * j0(t[1].exp() * (p - t[2])).abs()
    }
    match kind {
        ModelKind::Bessel0 => bessel(theta, p),
        ModelKind::Bessel0TwoPeak => bessel(&theta[..3], p) + bessel(&theta[3..], p),
        ModelKind::Kummer1 => {
            let d = theta[1].exp() * (p - theta[2]).abs();
            theta[0].exp() * (-d).exp() * (1.0 - 2.0 * d).abs()
        }
        ModelKind::Unfit | ModelKind::Degenerate => unreachable!("no model for {kind}"),
    }
}
