//! Closed-form quantities for the correlated Wiener process below two
//! absorbing levels.
//!
//! With distances `d = B - x`, the map `z = (s2 d1 - s1 rho d2, s1 sqrt(1-rho^2) d2)`
//! turns the process into an isotropic Brownian motion with variance `K3^2`
//! per unit time, confined to a wedge of opening `alpha = arccos(-rho)`. The
//! face `phi = 0` is `x2 = B2` and the face `phi = alpha` is `x1 = B1`. Polar
//! coordinates of `z` are `(rbar, phi)`; the Jacobian of the map is `K3`.
//!
//! The absorbed density used here carries the Girsanov factor
//! `exp(K1 (x1 - x01) + K2 (x2 - x02))`, with `(K1, K2)` the solution of
//! `Sigma k = mu`. The joint density of the surviving coordinate and the
//! first hitting time is the outward probability flux of that density through
//! the hit face.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_dt, wiener_transition, Boundary, Component, WienerParams};
use crate::quad::QuadSpec;
use crate::special::{log_bessel_i, log_normal_pdf, sin_pi, SeriesControl};

/// Image of a point in the wedge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPoint {
    pub rbar: f64,
    pub phi: f64,
}

/// A sum `value * exp(log_scale)`, kept apart so huge Bessel factors can be
/// combined with small exponentials before exponentiation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledSum {
    pub value: f64,
    pub log_scale: f64,
}

impl ScaledSum {
    pub fn total(&self) -> f64 {
        if self.value == 0.0 {
            0.0
        } else {
            self.value * self.log_scale.exp()
        }
    }
}

/// Value of `f_(T1,T2)` on the diagonal of the driftless case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DiagValue {
    Finite(f64),
    Infinite,
}

fn check_below(x: [f64; 2], b: &Boundary) -> Result<()> {
    if !(x[0].is_finite() && x[1].is_finite()) {
        return Err(Error::Domain("point must be finite".into()));
    }
    if x[0] > b.b1 || x[1] > b.b2 {
        return Err(Error::Domain(format!(
            "point ({}, {}) lies above the levels ({}, {})",
            x[0], x[1], b.b1, b.b2
        )));
    }
    Ok(())
}

fn check_setup(p: &WienerParams, b: &Boundary) -> Result<()> {
    b.validate_for([p.x01, p.x02])
}

pub fn polar_transform(x: [f64; 2], p: &WienerParams, b: &Boundary) -> Result<PolarPoint> {
    check_below(x, b)?;
    let d1 = b.b1 - x[0];
    let d2 = b.b2 - x[1];
    let c = p.sigma2 * d1 - p.sigma1 * p.rho * d2;
    let s = p.sigma1 * (1.0 - p.rho * p.rho).sqrt() * d2;
    let rbar = c.hypot(s);
    let phi = if rbar == 0.0 {
        0.0
    } else {
        s.atan2(c).clamp(0.0, p.alpha)
    };
    Ok(PolarPoint { rbar, phi })
}

/// Generic wedge series `sum_n coef(n) I_{n order_step}(z)`, returned with the
/// `exp(z)` growth factored out.
///
/// Truncation: stop once three consecutive terms are below `rel_tol` times
/// the running sum (never before `n = 10`), or at `max_terms`.
fn wedge_series(
    order_step: f64,
    z: f64,
    ctl: &SeriesControl,
    coef: impl Fn(usize) -> f64,
) -> Result<ScaledSum> {
    if z == 0.0 {
        return Ok(ScaledSum {
            value: 0.0,
            log_scale: 0.0,
        });
    }
    let mut sum = 0.0;
    let mut small = 0;
    for n in 1..=ctl.max_terms {
        let c = coef(n);
        let term = if c == 0.0 {
            0.0
        } else {
            c * (log_bessel_i(n as f64 * order_step, z, ctl)? - z).exp()
        };
        sum += term;
        if term.abs() <= ctl.rel_tol * sum.abs() {
            small += 1;
        } else {
            small = 0;
        }
        if n >= 10 && small >= 3 {
            break;
        }
    }
    Ok(ScaledSum {
        value: sum,
        log_scale: z,
    })
}

pub fn h_series_scaled(
    rbar: f64,
    rbar0: f64,
    phi: f64,
    phi0: f64,
    t: f64,
    p: &WienerParams,
    ctl: &SeriesControl,
) -> Result<ScaledSum> {
    check_dt(t)?;
    let step = PI / p.alpha;
    let a = phi / p.alpha;
    let a0 = phi0 / p.alpha;
    let z = rbar * rbar0 / (p.k3 * p.k3 * t);
    wedge_series(step, z, ctl, |n| {
        let nf = n as f64;
        sin_pi(nf * a0) * sin_pi(nf * a)
    })
}

/// `H(rbar, rbar0, phi, phi0, t) = sum_n sin(n pi phi0/alpha) sin(n pi phi/alpha) I_{n pi/alpha}(rbar rbar0 / (K3^2 t))`.
pub fn h_series(
    rbar: f64,
    rbar0: f64,
    phi: f64,
    phi0: f64,
    t: f64,
    p: &WienerParams,
    ctl: &SeriesControl,
) -> Result<f64> {
    Ok(h_series_scaled(rbar, rbar0, phi, phi0, t, p, ctl)?.total())
}

fn delta(c: Component, n: usize) -> f64 {
    match c {
        Component::One => 1.0,
        Component::Two => {
            if n % 2 == 1 {
                1.0
            } else {
                -1.0
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn g_series_scaled(
    i: Component,
    rbar0: f64,
    phi0: f64,
    xi: f64,
    t: f64,
    p: &WienerParams,
    b: &Boundary,
    ctl: &SeriesControl,
) -> Result<ScaledSum> {
    check_dt(t)?;
    let di = b.level(i) - xi;
    if di < 0.0 {
        return Err(Error::Domain(format!("x{} = {xi} lies above its level", i.index() + 1)));
    }
    let sj = p.sigma(i.other());
    let z = sj * di * rbar0 / (p.k3 * p.k3 * t);
    let a0 = phi0 / p.alpha;
    wedge_series(PI / p.alpha, z, ctl, |n| {
        let nf = n as f64;
        delta(i, n) * nf * sin_pi(nf * a0)
    })
}

/// `G_ij = sum_n delta_i n sin(n pi phi0/alpha) I_{n pi/alpha}(sigma_j (B_i - x_i) rbar0 / (K3^2 t))`
/// with `delta_1 = 1`, `delta_2 = (-1)^(n+1)`.
#[allow(clippy::too_many_arguments)]
pub fn g_series(
    i: Component,
    rbar0: f64,
    phi0: f64,
    xi: f64,
    t: f64,
    p: &WienerParams,
    b: &Boundary,
    ctl: &SeriesControl,
) -> Result<f64> {
    Ok(g_series_scaled(i, rbar0, phi0, xi, t, p, b, ctl)?.total())
}

fn nu_sq(p: &WienerParams) -> f64 {
    let (s1, s2, m1, m2) = (p.sigma1, p.sigma2, p.mu1, p.mu2);
    s2 * s2 * m1 * m1 - 2.0 * p.rho * s1 * s2 * m1 * m2 + s1 * s1 * m2 * m2
}

/// Unconstrained transition density of the Wiener process from its start.
pub fn f_free(x: [f64; 2], t: f64, p: &WienerParams) -> Result<f64> {
    let tr = wiener_transition(p, [p.x01, p.x02], t)?;
    let det = tr.det();
    let dx = [x[0] - tr.mean[0], x[1] - tr.mean[1]];
    let q = (tr.cov[1][1] * dx[0] * dx[0] - 2.0 * tr.cov[0][1] * dx[0] * dx[1]
        + tr.cov[0][0] * dx[1] * dx[1])
        / det;
    Ok((-0.5 * q).exp() / (2.0 * PI * det.sqrt()))
}

/// Density of the process at `x` at time `t` on the event that neither
/// component has reached its level.
pub fn f_abs_with(x: [f64; 2], t: f64, p: &WienerParams, b: &Boundary, ctl: &SeriesControl) -> Result<f64> {
    check_dt(t)?;
    check_setup(p, b)?;
    check_below(x, b)?;
    if x[0] == b.b1 || x[1] == b.b2 {
        return Ok(0.0);
    }
    let pt = polar_transform(x, p, b)?;
    let p0 = polar_transform([p.x01, p.x02], p, b)?;
    let k3s = p.k3 * p.k3;
    let h = h_series_scaled(pt.rbar, p0.rbar, pt.phi, p0.phi, t, p, ctl)?;
    if h.value == 0.0 {
        return Ok(0.0);
    }
    // exp(-(r^2 + r0^2)/(2 K3^2 t)) exp(z) = exp(-(r - r0)^2/(2 K3^2 t))
    let log = (2.0 / (p.alpha * p.k3 * t)).ln() + p.k1 * (x[0] - p.x01) + p.k2 * (x[1] - p.x02)
        - nu_sq(p) * t / (2.0 * k3s)
        - (pt.rbar - p0.rbar).powi(2) / (2.0 * k3s * t);
    Ok(h.value * log.exp())
}

pub fn f_abs(x: [f64; 2], t: f64, p: &WienerParams, b: &Boundary) -> Result<f64> {
    f_abs_with(x, t, p, b, &SeriesControl::default())
}

/// Absorbed marginal density of one component (method of images).
pub fn f_univ_abs(i: Component, xi: f64, t: f64, p: &WienerParams, b: &Boundary) -> Result<f64> {
    check_dt(t)?;
    check_setup(p, b)?;
    let bi = b.level(i);
    if xi > bi {
        return Err(Error::Domain(format!("x{} = {xi} lies above its level {bi}", i.index() + 1)));
    }
    let (m, s, x0) = (p.mu(i), p.sigma(i), p.x0(i));
    let sd = s * t.sqrt();
    let direct = log_normal_pdf(xi, x0 + m * t, sd)?;
    let image = 2.0 * m * (bi - x0) / (s * s) + log_normal_pdf(xi, 2.0 * bi - x0 + m * t, sd)?;
    // direct - image = direct (1 - exp(image - direct)), image <= direct below the level
    Ok(direct.exp() * -(image - direct).min(0.0).exp_m1())
}

fn log_inverse_gaussian(d: f64, mu: f64, sigma: f64, tau: f64) -> f64 {
    d.ln() - sigma.ln() - 0.5 * (2.0 * PI * tau.powi(3)).ln()
        - (d - mu * tau).powi(2) / (2.0 * sigma * sigma * tau)
}

/// Inverse-Gaussian first-passage density of component `i` to its level.
/// `from = Some((y, s))` restarts the component at `y` at time `s`.
pub fn f_fpt_univ(
    i: Component,
    t: f64,
    p: &WienerParams,
    b: &Boundary,
    from: Option<(f64, f64)>,
) -> Result<f64> {
    let (y, s) = from.unwrap_or((p.x0(i), 0.0));
    let tau = t - s;
    check_dt(tau)?;
    let d = b.level(i) - y;
    if !(d > 0.0) {
        return Err(Error::Domain(format!(
            "start {y} must lie below the level {}",
            b.level(i)
        )));
    }
    Ok(log_inverse_gaussian(d, p.mu(i), p.sigma(i), tau).exp())
}

/// Conditional density of `X_i` at time `t` given `X_j = x_j` and no passage
/// yet.
pub fn f_cond_xx(
    i: Component,
    xi: f64,
    xj: f64,
    t: f64,
    p: &WienerParams,
    b: &Boundary,
) -> Result<f64> {
    check_dt(t)?;
    check_setup(p, b)?;
    let j = i.other();
    let bj = b.level(j);
    if xj >= bj {
        return Err(Error::Domain(format!(
            "conditioning value x{} = {xj} must lie strictly below its level",
            j.index() + 1
        )));
    }
    let mut x = [0.0; 2];
    x[i.index()] = xi;
    x[j.index()] = xj;
    check_below(x, b)?;
    if xi == b.level(i) {
        return Ok(0.0);
    }
    let ctl = SeriesControl::default();
    let pt = polar_transform(x, p, b)?;
    let p0 = polar_transform([p.x01, p.x02], p, b)?;
    let h = h_series_scaled(pt.rbar, p0.rbar, pt.phi, p0.phi, t, p, &ctl)?;
    if h.value == 0.0 {
        return Ok(0.0);
    }
    let (si, sj) = (p.sigma(i), p.sigma(j));
    let (x0i, x0j) = (p.x0(i), p.x0(j));
    let k3s = p.k3 * p.k3;
    let denom = -(2.0 * (bj - x0j) * (xj - bj) / (sj * sj * t)).exp_m1();
    let log = (2.0 * sj * (2.0 * PI * t).sqrt() / (p.alpha * p.k3 * t)).ln()
        - p.k(i) * (si / sj * (xj - x0j) * p.rho - (xi - x0i) + p.n(j) * t)
        - ((pt.rbar - p0.rbar).powi(2) - (xj - x0j).powi(2) * si * si * (1.0 - p.rho * p.rho))
            / (2.0 * k3s * t)
        - denom.ln();
    Ok(h.value * log.exp())
}

/// Joint density of `(X_i^a(T_j), T_j)`: position of component `i` at the
/// moment component `j` reaches its level first.
pub fn f_joint_with(
    i: Component,
    xi: f64,
    t: f64,
    p: &WienerParams,
    b: &Boundary,
    ctl: &SeriesControl,
) -> Result<f64> {
    check_dt(t)?;
    check_setup(p, b)?;
    let j = i.other();
    let di = b.level(i) - xi;
    if !(di >= 0.0) {
        return Err(Error::Domain(format!("x{} = {xi} lies above its level", i.index() + 1)));
    }
    if di == 0.0 {
        return Ok(0.0);
    }
    let p0 = polar_transform([p.x01, p.x02], p, b)?;
    let g = g_series_scaled(i, p0.rbar, p0.phi, xi, t, p, b, ctl)?;
    if g.value == 0.0 {
        return Ok(0.0);
    }
    let k3s = p.k3 * p.k3;
    let r = p.sigma(j) * di;
    let drift = p.k(i) * (xi - p.x0(i)) + p.k(j) * (b.level(j) - p.x0(j));
    let log = (PI / (p.alpha * p.alpha * di * t)).ln() + drift
        - nu_sq(p) * t / (2.0 * k3s)
        - (r - p0.rbar).powi(2) / (2.0 * k3s * t);
    Ok(g.value * log.exp())
}

pub fn f_joint(i: Component, xi: f64, t: f64, p: &WienerParams, b: &Boundary) -> Result<f64> {
    f_joint_with(i, xi, t, p, b, &SeriesControl::default())
}

/// Conditional density of `X_i^a(T_j)` given `T_j = t`, written directly from
/// the closed form (not as a ratio).
pub fn f_cond_xt(i: Component, xi: f64, t: f64, p: &WienerParams, b: &Boundary) -> Result<f64> {
    check_dt(t)?;
    check_setup(p, b)?;
    let j = i.other();
    let di = b.level(i) - xi;
    if !(di > 0.0) {
        return Err(Error::Domain(format!(
            "x{} = {xi} must lie strictly below its level",
            i.index() + 1
        )));
    }
    let ctl = SeriesControl::default();
    let p0 = polar_transform([p.x01, p.x02], p, b)?;
    let g = g_series_scaled(i, p0.rbar, p0.phi, xi, t, p, b, &ctl)?;
    if g.value == 0.0 {
        return Ok(0.0);
    }
    let (si, sj) = (p.sigma(i), p.sigma(j));
    let dj0 = b.level(j) - p.x0(j);
    let di0 = b.level(i) - p.x0(i);
    let k3s = p.k3 * p.k3;
    let a = p.rho * si * dj0 - sj * di0;
    let log = (sj * PI * (2.0 * PI * t).sqrt() / (p.alpha * p.alpha * di * dj0)).ln()
        - p.k(i) * (si / sj * dj0 * p.rho - (xi - p.x0(i)) + p.n(j) * t)
        - (a * a + (sj * di).powi(2) - 2.0 * sj * di * p0.rbar) / (2.0 * k3s * t);
    Ok(g.value * log.exp())
}

/// Off-diagonal joint density of `(T1, T2)` in the driftless case.
pub fn joint_fpt_driftless(
    t1: f64,
    t2: f64,
    p: &WienerParams,
    b: &Boundary,
    ctl: &SeriesControl,
) -> Result<f64> {
    if !p.is_driftless() {
        return Err(Error::Unsupported(
            "driftless closed form called with nonzero drift".into(),
        ));
    }
    check_dt(t1)?;
    check_dt(t2)?;
    check_setup(p, b)?;
    if t1 == t2 {
        return Err(Error::Domain("use joint_fpt_diag on the diagonal".into()));
    }
    let (ti, tj, later) = if t1 < t2 {
        (t1, t2, Component::Two)
    } else {
        (t2, t1, Component::One)
    };
    let p0 = polar_transform([p.x01, p.x02], p, b)?;
    let r0s = p0.rbar * p0.rbar;
    let k3s = p.k3 * p.k3;
    let rho2 = p.rho * p.rho;
    let w = r0s * (tj - ti) / (4.0 * k3s * ti * (tj - ti * rho2));
    let a0 = p0.phi / p.alpha;
    let s = wedge_series(PI / (2.0 * p.alpha), w, ctl, |n| {
        let nf = n as f64;
        delta(later, n) * nf * sin_pi(nf * a0)
    })?;
    if s.value == 0.0 {
        return Ok(0.0);
    }
    // exp(-r0^2 [tj + ti (1 - 2 rho^2)] / (4 K3^2 ti (tj - ti rho^2))) exp(w)
    let log = (PI * (1.0 - rho2).sqrt()
        / (2.0 * p.alpha * p.alpha * (ti * (tj - ti * rho2)).sqrt() * (tj - ti)))
        .ln()
        - r0s * (1.0 - rho2) / (2.0 * k3s * (tj - ti * rho2));
    Ok(s.value * log.exp())
}

/// Driftless joint density on the diagonal `t1 = t2 = t`.
pub fn joint_fpt_diag(t: f64, p: &WienerParams, b: &Boundary) -> Result<DiagValue> {
    if !p.is_driftless() {
        return Err(Error::Unsupported(
            "the diagonal is only available without drift".into(),
        ));
    }
    check_dt(t)?;
    check_setup(p, b)?;
    if p.rho < 0.0 {
        return Ok(DiagValue::Finite(0.0));
    }
    if p.rho > 0.0 {
        return Ok(DiagValue::Infinite);
    }
    let d1 = b.b1 - p.x01;
    let d2 = b.b2 - p.x02;
    let (s1, s2) = (p.sigma1, p.sigma2);
    let v = d1 * d2 / (2.0 * PI * s1 * s2 * t.powi(3))
        * (-(s2 * s2 * d1 * d1 + s1 * s1 * d2 * d2) / (2.0 * s1 * s1 * s2 * s2 * t)).exp();
    Ok(DiagValue::Finite(v))
}

/// `f_(X_j^a, T_i)` at time `t_i` tabulated on quadrature nodes in the
/// distance `d = B_j - x_j`, with quadrature weights folded in.
#[derive(Debug, Clone)]
pub struct JointSlice {
    pub later: Component,
    pub t_first: f64,
    pub nodes: Vec<(f64, f64)>,
}

impl JointSlice {
    pub fn new(
        later: Component,
        t_first: f64,
        p: &WienerParams,
        b: &Boundary,
        quad: &QuadSpec,
        ctl: &SeriesControl,
    ) -> Result<Self> {
        check_dt(t_first)?;
        let j = later;
        let sj = p.sigma(j);
        let start_gap = (b.level(j) - p.x0(j) - p.mu(j) * t_first).max(0.0);
        let len = start_gap + quad.c * sj * t_first.sqrt();
        let mut nodes = Vec::with_capacity(quad.n + 1);
        for (d, w) in quad.nodes(len) {
            if d == 0.0 || w == 0.0 {
                continue;
            }
            let f = f_joint_with(j, b.level(j) - d, t_first, p, b, ctl)?;
            if f != 0.0 {
                nodes.push((d, w * f));
            }
        }
        Ok(JointSlice {
            later,
            t_first,
            nodes,
        })
    }

    /// Joint density at `(t_first, t_first + tau)` for the ordering of this
    /// slice.
    pub fn eval(&self, tau: f64, p: &WienerParams) -> f64 {
        if !(tau > 0.0) {
            return 0.0;
        }
        let (m, s) = (p.mu(self.later), p.sigma(self.later));
        self.nodes
            .iter()
            .map(|&(d, wf)| wf * log_inverse_gaussian(d, m, s, tau).exp())
            .sum()
    }
}

/// Joint density of `(T1, T2)` with drift, by quadrature over the surviving
/// coordinate at the first passage.
pub fn joint_fpt_drift(
    t1: f64,
    t2: f64,
    p: &WienerParams,
    b: &Boundary,
    quad: &QuadSpec,
) -> Result<f64> {
    joint_fpt_drift_with(t1, t2, p, b, quad, &SeriesControl::default())
}

pub fn joint_fpt_drift_with(
    t1: f64,
    t2: f64,
    p: &WienerParams,
    b: &Boundary,
    quad: &QuadSpec,
    ctl: &SeriesControl,
) -> Result<f64> {
    check_dt(t1)?;
    check_dt(t2)?;
    quad.validate()?;
    if t1 == t2 {
        return Err(Error::Unsupported(
            "the drifted joint density is not available on the diagonal".into(),
        ));
    }
    let (ti, tj, later) = if t1 < t2 {
        (t1, t2, Component::Two)
    } else {
        (t2, t1, Component::One)
    };
    let slice = JointSlice::new(later, ti, p, b, quad, ctl)?;
    Ok(slice.eval(tj - ti, p))
}

/// Joint density of `(T1, T2)` on a tensor grid, with `NaN` on the diagonal.
/// Driftless parameters use the closed series; otherwise the quadrature form,
/// sharing one [`JointSlice`] per distinct first-passage time.
pub fn joint_fpt_grid(
    t1s: &[f64],
    t2s: &[f64],
    p: &WienerParams,
    b: &Boundary,
    quad: &QuadSpec,
    ctl: &SeriesControl,
) -> Result<Vec<f64>> {
    check_setup(p, b)?;
    quad.validate()?;
    let pairs: Vec<(f64, f64)> = t1s
        .iter()
        .flat_map(|&a| t2s.iter().map(move |&c| (a, c)))
        .collect();
    if p.is_driftless() {
        return pairs
            .par_iter()
            .map(|&(a, c)| {
                if a == c {
                    Ok(match joint_fpt_diag(a, p, b)? {
                        DiagValue::Finite(v) => v,
                        DiagValue::Infinite => f64::NAN,
                    })
                } else {
                    joint_fpt_driftless(a, c, p, b, ctl)
                }
            })
            .collect();
    }
    let slices_for = |ts: &[f64], later: Component| -> Result<Vec<JointSlice>> {
        ts.par_iter()
            .map(|&t| JointSlice::new(later, t, p, b, quad, ctl))
            .collect()
    };
    // T1 first -> component 2 still running, and vice versa
    let first1 = slices_for(t1s, Component::Two)?;
    let first2 = slices_for(t2s, Component::One)?;
    let n2 = t2s.len();
    Ok((0..pairs.len())
        .into_par_iter()
        .map(|k| {
            let (a, c) = (k / n2, k % n2);
            let (t1, t2) = (t1s[a], t2s[c]);
            if t1 < t2 {
                first1[a].eval(t2 - t1, p)
            } else if t2 < t1 {
                first2[c].eval(t1 - t2, p)
            } else {
                f64::NAN
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(rho: f64) -> (WienerParams, Boundary) {
        (
            WienerParams::new([0.0, 0.0], [1.0, 1.0], rho, [0.0, 0.0]).unwrap(),
            Boundary::absorbing(1.0, 1.0),
        )
    }

    #[test]
    fn polar_examples() {
        let (p, b) = sym(0.5);
        let pt = polar_transform([1.0, 1.0], &p, &b).unwrap();
        assert_eq!(pt.rbar, 0.0);
        let pt = polar_transform([0.0, 0.0], &p, &b).unwrap();
        assert!((pt.rbar - 1.0).abs() < 1e-15);
        assert!((pt.phi - PI / 3.0).abs() < 1e-15);
        assert!((pt.phi / p.alpha - 0.5).abs() < 1e-15);
        let (p, b) = sym(0.0);
        let pt = polar_transform([0.0, 0.0], &p, &b).unwrap();
        assert!((pt.rbar - 2f64.sqrt()).abs() < 1e-15);
        assert!((pt.phi - PI / 4.0).abs() < 1e-15);
        assert!(polar_transform([1.5, 0.0], &p, &b).is_err());
    }

    #[test]
    fn boundary_faces_map_to_wedge_edges() {
        let (p, b) = sym(-0.4);
        let on1 = polar_transform([1.0, -0.3], &p, &b).unwrap();
        assert!((on1.phi - p.alpha).abs() < 1e-14);
        let on2 = polar_transform([-0.7, 1.0], &p, &b).unwrap();
        assert_eq!(on2.phi, 0.0);
    }

    #[test]
    fn univariate_examples() {
        let (p, b) = sym(0.0);
        let v = f_univ_abs(Component::One, 0.0, 1.0, &p, &b).unwrap();
        assert!((v - 0.344_950_5).abs() < 1e-6);
        assert_eq!(f_univ_abs(Component::One, 1.0, 1.0, &p, &b).unwrap(), 0.0);
        let v = f_fpt_univ(Component::One, 1.0, &p, &b, None).unwrap();
        assert!((v - (-0.5f64).exp() / (2.0 * PI).sqrt()).abs() < 1e-15);
        assert!(f_fpt_univ(Component::One, 0.0, &p, &b, None).is_err());
    }

    #[test]
    fn diagonal_examples() {
        let (p, b) = sym(0.0);
        match joint_fpt_diag(1.0, &p, &b).unwrap() {
            DiagValue::Finite(v) => assert!((v - (-1f64).exp() / (2.0 * PI)).abs() < 1e-15),
            DiagValue::Infinite => panic!(),
        }
        let (p, b) = sym(-0.5);
        assert_eq!(joint_fpt_diag(1.0, &p, &b).unwrap(), DiagValue::Finite(0.0));
        let (p, b) = sym(0.5);
        assert_eq!(joint_fpt_diag(1.0, &p, &b).unwrap(), DiagValue::Infinite);
        let q = WienerParams::new([1.0, 0.0], [1.0, 1.0], 0.5, [0.0; 2]).unwrap();
        assert!(joint_fpt_diag(1.0, &q, &b).is_err());
    }
}
