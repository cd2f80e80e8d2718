//! Modified Bessel function of the first kind, real order `nu >= 0`.
//!
//! Three evaluation paths, selected by [`BesselMethod::select`]:
//! * ascending power series for `x <= max(30, 2 nu)`, accumulated with a
//!   running log offset so large orders do not overflow;
//! * Hankel's large-argument expansion when `nu^2 <= 4x`, where its terms
//!   stay small enough that the alternating sum loses no precision;
//! * Debye's uniform expansion in `nu` otherwise (here `nu > 2 sqrt(x) > 10`).

use std::sync::OnceLock;

use super::SeriesControl;
use crate::error::{Error, Result};

/// Series region boundary on the argument (together with `2 nu`).
pub(crate) const SERIES_MAX_X: f64 = 30.0;

const DEBYE_TERMS: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselMethod {
    Series,
    Hankel,
    Debye,
}

impl BesselMethod {
    pub fn select(nu: f64, x: f64) -> BesselMethod {
        if x <= SERIES_MAX_X.max(2.0 * nu) {
            BesselMethod::Series
        } else if nu * nu <= 4.0 * x {
            BesselMethod::Hankel
        } else {
            BesselMethod::Debye
        }
    }
}

fn check_args(nu: f64, x: f64) -> Result<()> {
    if !(nu.is_finite() && nu >= 0.0) {
        return Err(Error::Domain(format!("Bessel order must be >= 0, got {nu}")));
    }
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::Domain(format!("Bessel argument must be >= 0, got {x}")));
    }
    Ok(())
}

/// `ln I_nu(x)`; `-inf` at `x = 0` for positive order.
pub fn log_bessel_i(nu: f64, x: f64, ctl: &SeriesControl) -> Result<f64> {
    check_args(nu, x)?;
    if x == 0.0 {
        return Ok(if nu == 0.0 { 0.0 } else { f64::NEG_INFINITY });
    }
    log_bessel_i_with(BesselMethod::select(nu, x), nu, x, ctl)
}

/// `exp(-x) I_nu(x)`.
pub fn bessel_i_scaled(nu: f64, x: f64, ctl: &SeriesControl) -> Result<f64> {
    let l = log_bessel_i(nu, x, ctl)?;
    Ok((l - x).exp())
}

pub fn bessel_i(nu: f64, x: f64, ctl: &SeriesControl) -> Result<f64> {
    Ok(log_bessel_i(nu, x, ctl)?.exp())
}

pub(crate) fn log_bessel_i_with(
    method: BesselMethod,
    nu: f64,
    x: f64,
    ctl: &SeriesControl,
) -> Result<f64> {
    match method {
        BesselMethod::Series => match log_series(nu, x, ctl) {
            Err(Error::NoConvergence { .. }) if nu >= 20.0 => log_debye(nu, x, ctl),
            other => other,
        },
        BesselMethod::Hankel => match log_hankel(nu, x, ctl) {
            Some(v) => Ok(v),
            None if nu >= 10.0 => log_debye(nu, x, ctl),
            None => log_series(nu, x, ctl),
        },
        BesselMethod::Debye => log_debye(nu, x, ctl),
    }
}

fn log_series(nu: f64, x: f64, ctl: &SeriesControl) -> Result<f64> {
    let q = 0.25 * x * x;
    let mut offset = nu * (0.5 * x).ln() - libm::lgamma(nu + 1.0);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..ctl.max_terms {
        let kf = k as f64;
        let ratio = q / ((kf + 1.0) * (nu + kf + 1.0));
        term *= ratio;
        sum += term;
        if ratio < 1.0 && term * ratio / (1.0 - ratio) <= stop_tol(ctl) * sum {
            return Ok(offset + sum.ln());
        }
        if sum > 1e280 {
            offset += sum.ln();
            term /= sum;
            sum = 1.0;
        }
    }
    Err(Error::NoConvergence {
        terms: ctl.max_terms,
    })
}

fn log_hankel(nu: f64, x: f64, ctl: &SeriesControl) -> Option<f64> {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut prev = f64::INFINITY;
    for k in 1..ctl.max_terms {
        let odd = (2 * k - 1) as f64;
        term *= -(mu - odd * odd) / (8.0 * k as f64 * x);
        if term == 0.0 {
            break;
        }
        if term.abs() > prev && term.abs() > ctl.rel_tol * sum.abs() {
            return None;
        }
        prev = term.abs();
        sum += term;
        if term.abs() <= stop_tol(ctl) * sum.abs() {
            break;
        }
    }
    if sum <= 0.0 {
        return None;
    }
    Some(x - 0.5 * (2.0 * std::f64::consts::PI * x).ln() + sum.ln())
}

fn log_debye(nu: f64, x: f64, ctl: &SeriesControl) -> Result<f64> {
    let z = x / nu;
    let t = (1.0 + z * z).sqrt();
    let p = 1.0 / t;
    let eta = t + (z / (1.0 + t)).ln();
    let polys = debye_polynomials();
    let mut sum = 1.0;
    let mut scale = 1.0;
    let mut converged = false;
    for u in polys.iter().skip(1) {
        scale /= nu;
        let term = eval_poly(u, p) * scale;
        sum += term;
        if term.abs() <= stop_tol(ctl) * sum.abs() {
            converged = true;
            break;
        }
    }
    if !converged && nu < 10.0 {
        return Err(Error::NoConvergence {
            terms: DEBYE_TERMS,
        });
    }
    Ok(nu * eta - 0.5 * (2.0 * std::f64::consts::PI * nu).ln() - 0.5 * t.ln() + sum.ln())
}

// Truncation target for the individual expansions, well inside `rel_tol`.
fn stop_tol(ctl: &SeriesControl) -> f64 {
    (1e-3 * ctl.rel_tol).max(f64::EPSILON)
}

fn eval_poly(c: &[f64], p: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * p + a)
}

/// Coefficients (ascending powers of `p`) of Debye's `u_k(p)`, from
/// `u_{k+1} = p^2 (1 - p^2) u_k' / 2 + (1/8) int_0^p (1 - 5 s^2) u_k(s) ds`.
fn debye_polynomials() -> &'static [Vec<f64>] {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut out = vec![vec![1.0]];
        for k in 0..DEBYE_TERMS {
            let u = &out[k];
            let deg = u.len() + 3;
            let mut next = vec![0.0; deg];
            for (j, &a) in u.iter().enumerate() {
                if j >= 1 {
                    let d = j as f64 * a;
                    next[j + 1] += 0.5 * d;
                    next[j + 3] -= 0.5 * d;
                }
                next[j + 1] += a / (8.0 * (j + 1) as f64);
                next[j + 3] -= 5.0 * a / (8.0 * (j + 3) as f64);
            }
            while next.last() == Some(&0.0) {
                next.pop();
            }
            out.push(next);
        }
        out
    })
}
