//! Special functions needed by the models and the significance tests.

use statrs::function::beta::checked_beta_reg;

use crate::{Error, Result};

/// Zeroes of J0 in increasing order (first five).
pub const J0_ZEROS: [f64; 5] = [
    2.404_825_557_695_773,
    5.520_078_110_286_311,
    8.653_727_912_911_013,
    11.791_534_439_014_281,
    14.930_917_708_487_787,
];

/// Zero-order Bessel function of the first kind.
///
/// Power series for |x| ≤ 8, Miller's backward recurrence normalized by
/// `J0 + 2 Σ J2k = 1` above that, and the Hankel expansion past |x| = 2000
/// where the recurrence length would dominate.
pub fn bessel_j0(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!("bessel_j0 of non-finite {x}")));
    }
    Ok(j0(x))
}

/// Infallible J0 for finite inputs; used on the fitting hot path.
pub(crate) fn j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 8.0 {
        j0_series(ax)
    } else if ax <= 2000.0 {
        j0_miller(ax)
    } else {
        j0_hankel(ax)
    }
}

fn j0_series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let kf = k as f64;
        term *= q / (kf * kf);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-3) {
            break;
        }
    }
    sum
}

fn j0_miller(x: f64) -> f64 {
    // Start index well past x so that J_m(x) is negligible.
    let start = x + 30.0 + 8.0 * x.cbrt();
    let m = 2 * ((start / 2.0).ceil() as usize);
    let two_over_x = 2.0 / x;
    let mut j_above = 0.0; // J_{k+1}
    let mut j = 1e-30; // J_k, k = m
    let mut even_sum = 0.0; // Σ J_{2i}, i ≥ 1
    for k in (1..=m).rev() {
        let j_below = k as f64 * two_over_x * j - j_above;
        j_above = j;
        j = j_below;
        let idx = k - 1;
        if idx > 0 && idx % 2 == 0 {
            even_sum += j;
        }
        if j.abs() > 1e250 {
            j *= 1e-250;
            j_above *= 1e-250;
            even_sum *= 1e-250;
        }
    }
    j / (j + 2.0 * even_sum)
}

fn j0_hankel(x: f64) -> f64 {
    let y = 1.0 / x;
    let y2 = y * y;
    let p = 1.0 - y2 * (9.0 / 128.0) + y2 * y2 * (3675.0 / 32768.0);
    let q = y * (-1.0 / 8.0 + y2 * (75.0 / 1024.0) - y2 * y2 * (59535.0 / 262_144.0));
    let chi = x - std::f64::consts::FRAC_PI_4;
    (2.0 / (std::f64::consts::PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Regularized incomplete beta function Iₓ(a, b).
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) || !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::domain(format!("reg_inc_beta({x}, {a}, {b}) outside x∈[0,1], a>0, b>0")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    checked_beta_reg(a, b, x).map(|v| v.clamp(0.0, 1.0)).map_err(|e| Error::domain(e.to_string()))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("alpha {alpha} outside (0, 1)")))
    }
}

/// P(|T_df| > q).
pub fn t_two_sided_tail(q: f64, df: u32) -> Result<f64> {
    if df == 0 {
        return Err(Error::domain("t distribution needs df ≥ 1"));
    }
    let v = df as f64;
    let q = q.abs();
    reg_inc_beta(v / (v + q * q), 0.5 * v, 0.5)
}

/// P(F_{df1,df2} > q).
pub fn f_upper_tail(q: f64, df1: u32, df2: u32) -> Result<f64> {
    if df1 == 0 || df2 == 0 {
        return Err(Error::domain("F distribution needs df1, df2 ≥ 1"));
    }
    if q <= 0.0 {
        return Ok(1.0);
    }
    let (d1, d2) = (df1 as f64, df2 as f64);
    reg_inc_beta(d2 / (d2 + d1 * q), 0.5 * d2, 0.5 * d1)
}

/// Bisection for the q where a decreasing tail function equals `alpha`.
fn invert_tail(alpha: f64, tol: f64, tail: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = 1.0;
    while tail(hi)? > alpha {
        lo = hi;
        hi *= 2.0;
        if hi > 1e15 {
            return Err(Error::domain("quantile out of range"));
        }
    }
    while hi - lo > tol * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if tail(mid)? > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Two-sided critical value: P(|T_df| > q) = alpha.
pub fn t_critical(alpha_two_sided: f64, df: u32) -> Result<f64> {
    check_alpha(alpha_two_sided)?;
    if df == 0 {
        return Err(Error::domain("t_critical needs df ≥ 1"));
    }
    invert_tail(alpha_two_sided, 1e-12, |q| t_two_sided_tail(q, df))
}

/// Upper critical value: P(F_{df1,df2} > q) = alpha.
pub fn f_critical(alpha: f64, df1: u32, df2: u32) -> Result<f64> {
    check_alpha(alpha)?;
    if df1 == 0 || df2 == 0 {
        return Err(Error::domain("f_critical needs df1, df2 ≥ 1"));
    }
    invert_tail(alpha, 1e-12, |q| f_upper_tail(q, df1, df2))
}
