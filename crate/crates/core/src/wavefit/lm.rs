//! Levenberg-Marquardt least squares with Marquardt diagonal scaling and a
//! central-difference Jacobian.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::model::{eval_internal, n_params, pack, unpack};
use super::{FitConfig, ModelKind, ModelParams};
use crate::ingest::VolumeHistogram;
use crate::{Error, Result};

const LAMBDA_MAX: f64 = 1e16;

/// Box for the solver coordinates. Prices are clamped to `[p_lo, p_hi]`; log
/// scale parameters to `[ln_lo, ln_hi]`, which only guards against overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBounds {
    pub p_lo: f64,
    pub p_hi: f64,
    pub ln_lo: f64,
    pub ln_hi: f64,
}

impl ParamBounds {
    pub fn for_prices(p_lo: f64, p_hi: f64) -> Self {
        ParamBounds { p_lo, p_hi, ln_lo: -30.0, ln_hi: 12.0 }
    }

    fn clamp(&self, theta: &mut [f64]) {
        for (i, t) in theta.iter_mut().enumerate() {
            *t = if i % 3 == 2 { t.clamp(self.p_lo, self.p_hi) } else { t.clamp(self.ln_lo, self.ln_hi) };
        }
    }
}

/// Result of one local least-squares run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmFit {
    pub params: ModelParams,
    pub ssr: f64,
    pub initial_ssr: f64,
    /// Jacobian evaluations.
    pub iterations: usize,
    pub converged: bool,
    /// The damped normal matrix could not be factored; `params` is the best
    /// point reached.
    pub singular: bool,
    /// SSR after every accepted step, starting with the initial SSR.
    pub ssr_history: Vec<f64>,
}

/// Fits the model of `init` to a histogram's probabilities.
pub fn lm_fit(hist: &VolumeHistogram, init: &ModelParams, config: &FitConfig) -> Result<LmFit> {
    let min_points = if init.kind() == ModelKind::Bessel0TwoPeak { 7 } else { 4 };
    if hist.len() < min_points {
        return Err(Error::DegenerateDay(format!(
            "{}: {} prices, {} model needs at least {min_points}",
            hist.day(),
            hist.len(),
            init.kind()
        )));
    }
    let xs = hist.prices_f64();
    let bounds = ParamBounds::for_prices(xs[0], xs[xs.len() - 1]);
    Ok(lm_fit_points(&xs, hist.probabilities(), init, &bounds, config))
}

fn ssr_of(kind: ModelKind, theta: &[f64], xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = y - eval_internal(kind, theta, x);
            r * r
        })
        .sum()
}

/// Fits the model of `init` to arbitrary `(xs, ys)` points.
pub fn lm_fit_points(xs: &[f64], ys: &[f64], init: &ModelParams, bounds: &ParamBounds, config: &FitConfig) -> LmFit {
    assert_eq!(xs.len(), ys.len());
    let kind = init.kind();
    let n = n_params(kind);
    let mut theta = pack(init);
    bounds.clamp(&mut theta);

    let mut ssr = ssr_of(kind, &theta, xs, ys);
    let initial_ssr = ssr;
    let mut history = vec![ssr];
    let exact = 1e-28 * ys.iter().map(|y| y * y).sum::<f64>().max(f64::MIN_POSITIVE);

    let mut lambda = config.lambda_init;
    let mut iterations = 0;
    let mut converged = false;
    let mut singular = false;

    let mut grad = vec![0.0; n];
    let mut probe = theta.clone();
    while ssr.is_finite() && iterations < config.max_iterations {
        if ssr <= exact {
            converged = true;
            break;
        }
        iterations += 1;

        // Normal equations JᵀJ δ = Jᵀr accumulated row by row, r = y − f.
        let mut jtj = DMatrix::<f64>::zeros(n, n);
        let mut jtr = DVector::<f64>::zeros(n);
        let steps: Vec<f64> = theta.iter().map(|t| config.jacobian_step * t.abs().max(1.0)).collect();
        for (&x, &y) in xs.iter().zip(ys) {
            for j in 0..n {
                probe[j] = theta[j] + steps[j];
                let up = eval_internal(kind, &probe, x);
                probe[j] = theta[j] - steps[j];
                let down = eval_internal(kind, &probe, x);
                probe[j] = theta[j];
                grad[j] = (up - down) / (2.0 * steps[j]);
            }
            let r = y - eval_internal(kind, &theta, x);
            for a in 0..n {
                jtr[a] += grad[a] * r;
                for b in 0..=a {
                    jtj[(a, b)] += grad[a] * grad[b];
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                jtj[(b, a)] = jtj[(a, b)];
            }
        }
        let diag: Vec<f64> = (0..n).map(|j| jtj[(j, j)]).collect();
        let dmax = diag.iter().cloned().fold(0.0, f64::max);
        if !(dmax > 0.0 && dmax.is_finite()) {
            singular = true;
            break;
        }

        let mut stop = false;
        loop {
            let mut a = jtj.clone();
            for j in 0..n {
                a[(j, j)] += lambda * diag[j].max(1e-12 * dmax);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= config.lambda_up;
                if lambda > LAMBDA_MAX {
                    singular = true;
                    stop = true;
                    break;
                }
                continue;
            };
            let step = chol.solve(&jtr);
            let mut cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + s).collect();
            bounds.clamp(&mut cand);
            let step_norm = cand.iter().zip(&theta).map(|(c, t)| (c - t).powi(2)).sum::<f64>().sqrt();
            let cand_ssr = ssr_of(kind, &cand, xs, ys);
            if cand_ssr.is_finite() && cand_ssr < ssr {
                let rel = (ssr - cand_ssr) / ssr;
                theta = cand;
                probe.copy_from_slice(&theta);
                ssr = cand_ssr;
                history.push(ssr);
                lambda = (lambda * config.lambda_down).max(1e-15);
                if rel < config.ssr_rel_tol || step_norm < config.step_tol {
                    converged = true;
                    stop = true;
                }
                break;
            }
            if step_norm < config.step_tol {
                converged = true;
                stop = true;
                break;
            }
            lambda *= config.lambda_up;
            if lambda > LAMBDA_MAX {
                // No descent direction left at any damping: a local minimum.
                converged = true;
                stop = true;
                break;
            }
        }
        if stop {
            break;
        }
    }

    LmFit { params: unpack(kind, &theta), ssr, initial_ssr, iterations, converged, singular, ssr_history: history }
}
