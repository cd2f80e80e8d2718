//! Bivariate normal orthant probabilities.
//!
//! `bvnu` follows the Drezner-Wesolowsky single-integral representation with
//! Genz's refinements for `|r|` close to one. Strongly negative correlations
//! are reflected onto the positive branch via
//! `P(X > h, Y > k; r) = P(X > h) - P(X > h, Y > -k; -r)`.
#![allow(clippy::excessive_precision)]

use std::f64::consts::PI;

use super::normal::{std_normal_cdf, std_normal_pdf, std_normal_sf};
use crate::error::{Error, Result};
use crate::model::{Component, GaussianTransition};

// Gauss-Legendre, 20 points: (weight, node) for the negative half.
const GL20: [(f64, f64); 10] = [
    (0.1761400713915212e-01, -0.9931285991850949e+00),
    (0.4060142980038694e-01, -0.9639719272779138e+00),
    (0.6267204833410906e-01, -0.9122344282513259e+00),
    (0.8327674157670475e-01, -0.8391169718222188e+00),
    (0.1019301198172404e+00, -0.7463319064601508e+00),
    (0.1181945319615184e+00, -0.6360536807265150e+00),
    (0.1316886384491766e+00, -0.5108670019508271e+00),
    (0.1420961093183821e+00, -0.3737060887154196e+00),
    (0.1491729864726037e+00, -0.2277858511416451e+00),
    (0.1527533871307259e+00, -0.7652652113349733e-01),
];

const HIGH_CORR: f64 = 0.925;

/// `P(X > h, Y > k)` for standard normals with correlation `r`, `|r| < 1`.
pub fn bvnu(h: f64, k: f64, r: f64) -> f64 {
    if r < -HIGH_CORR {
        let v = std_normal_sf(h) - bvnu_pos(h, -k, -r);
        return v.clamp(0.0, 1.0);
    }
    let v = if r <= HIGH_CORR {
        bvnu_moderate(h, k, r)
    } else {
        bvnu_pos(h, k, r)
    };
    v.clamp(0.0, 1.0)
}

fn bvnu_moderate(h: f64, k: f64, r: f64) -> f64 {
    let mut bvn = 0.0;
    if r != 0.0 {
        let hk = h * k;
        let hs = 0.5 * (h * h + k * k);
        let asr = 0.5 * r.asin();
        for &(w, x) in &GL20 {
            for s in [-1.0, 1.0] {
                let sn = (asr * (s * x + 1.0)).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        bvn *= asr / (2.0 * PI);
    }
    bvn + std_normal_sf(h) * std_normal_sf(k)
}

// r in (0.925, 1)
fn bvnu_pos(h: f64, k: f64, r: f64) -> f64 {
    if r <= HIGH_CORR {
        return bvnu_moderate(h, k, r);
    }
    let hk = h * k;
    let a_s = (1.0 - r) * (1.0 + r);
    let mut a = a_s.sqrt();
    let b_s = (h - k) * (h - k);
    let c = (4.0 - hk) / 8.0;
    let d = (12.0 - hk) / 16.0;
    let mut bvn = 0.0;
    let asr = -0.5 * (b_s / a_s + hk);
    if asr > -100.0 {
        bvn = a
            * asr.exp()
            * (1.0 - c * (b_s - a_s) * (1.0 - d * b_s / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
    }
    if -hk < 100.0 {
        let b = (h - k).abs();
        bvn -= (-0.5 * hk).exp()
            * (2.0 * PI).sqrt()
            * std_normal_cdf(-b / a)
            * b
            * (1.0 - c * b_s * (1.0 - d * b_s / 5.0) / 3.0);
    }
    a *= 0.5;
    for &(w, x) in &GL20 {
        for s in [-1.0, 1.0] {
            let xn = a * (s * x + 1.0);
            let xs = xn * xn;
            let rs = (1.0 - xs).sqrt();
            let asr = -0.5 * (b_s / xs + hk);
            if asr > -100.0 {
                bvn += a
                    * w
                    * asr.exp()
                    * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs
                        - (1.0 + c * xs * (1.0 + d * xs)));
            }
        }
    }
    -bvn / (2.0 * PI) + std_normal_sf(h.max(k))
}

struct Standardized {
    h: f64,
    k: f64,
    r: f64,
}

fn standardize(x: [f64; 2], tr: &GaussianTransition) -> Result<Standardized> {
    let det = tr.det();
    if !(tr.cov[0][0] > 0.0 && tr.cov[1][1] > 0.0 && det > 0.0 && det.is_finite()) {
        return Err(Error::SingularCovariance { det });
    }
    let s1 = tr.cov[0][0].sqrt();
    let s2 = tr.cov[1][1].sqrt();
    Ok(Standardized {
        h: (x[0] - tr.mean[0]) / s1,
        k: (x[1] - tr.mean[1]) / s2,
        r: tr.cov[0][1] / (s1 * s2),
    })
}

/// Upper-orthant probability `P(Z1 >= x1, Z2 >= x2)` for `Z ~ N(tr)`.
pub fn bvn_survival(x: [f64; 2], tr: &GaussianTransition) -> Result<f64> {
    let s = standardize(x, tr)?;
    Ok(bvnu(s.h, s.k, s.r))
}

/// Lower-orthant probability `P(Z1 <= x1, Z2 <= x2)`.
pub fn bvn_cdf(x: [f64; 2], tr: &GaussianTransition) -> Result<f64> {
    let s = standardize(x, tr)?;
    Ok(bvnu(-s.h, -s.k, s.r))
}

/// `d/dx_axis P(Z1 >= x1, Z2 >= x2)`, which is `-pdf_axis(x_axis)` times the
/// conditional survival of the other coordinate.
pub fn bvn_survival_dx(axis: Component, x: [f64; 2], tr: &GaussianTransition) -> Result<f64> {
    let det = tr.det();
    if !(tr.cov[0][0] > 0.0 && tr.cov[1][1] > 0.0 && det > 0.0 && det.is_finite()) {
        return Err(Error::SingularCovariance { det });
    }
    let (a, o) = (axis.index(), axis.other().index());
    let sa = tr.sd(axis);
    let za = (x[a] - tr.mean[a]) / sa;
    let (cm, cs) = tr.conditional(axis.other(), x[a]);
    let tail = std_normal_sf((x[o] - cm) / cs);
    Ok(-std_normal_pdf(za) / sa * tail)
}
