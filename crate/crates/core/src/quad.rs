//! One-dimensional quadrature helpers shared by the analytic and solver code.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadScheme {
    /// Composite trapezoid on equally spaced points.
    Trapezoid,
    /// Composite trapezoid after the substitution `d = L s^2`, which clusters
    /// points next to the boundary where inverse-Gaussian factors with short
    /// elapsed time are concentrated.
    Graded,
}

/// Truncated semi-infinite quadrature: the integral over distances
/// `d in (0, inf)` from a level is cut at `c` spreads and sampled with `n`
/// panels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadSpec {
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_scheme")]
    pub scheme: QuadScheme,
}

fn default_c() -> f64 {
    8.0
}

fn default_n() -> usize {
    400
}

fn default_scheme() -> QuadScheme {
    QuadScheme::Graded
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec {
            c: default_c(),
            n: default_n(),
            scheme: default_scheme(),
        }
    }
}

impl QuadSpec {
    pub fn new(c: f64, n: usize, scheme: QuadScheme) -> Result<Self> {
        let q = QuadSpec { c, n, scheme };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::param("quad.c", format!("must be positive, got {}", self.c)));
        }
        if self.n < 16 {
            return Err(Error::param("quad.n", format!("must be at least 16, got {}", self.n)));
        }
        Ok(())
    }

    /// Nodes and weights for `int_0^len g(d) dd`, including both endpoints.
    pub fn nodes(&self, len: f64) -> Vec<(f64, f64)> {
        let n = self.n;
        let ds = 1.0 / n as f64;
        (0..=n)
            .map(|k| {
                let s = k as f64 * ds;
                let end = if k == 0 || k == n { 0.5 } else { 1.0 };
                match self.scheme {
                    QuadScheme::Trapezoid => (len * s, end * len * ds),
                    QuadScheme::Graded => (len * s * s, end * 2.0 * len * s * ds),
                }
            })
            .collect()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.reverse();
    out
}
