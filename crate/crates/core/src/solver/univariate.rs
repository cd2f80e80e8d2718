use crate::error::{Error, Result};
use crate::special::std_normal_sf;

/// One-dimensional Gaussian transition: `(mean, variance)` of `X(s + dt)`
/// given `X(s) = y`.
pub trait GaussianMarginal: Sync {
    fn marginal(&self, y: f64, dt: f64) -> Result<(f64, f64)>;
}

impl<F> GaussianMarginal for F
where
    F: Fn(f64, f64) -> Result<(f64, f64)> + Sync,
{
    fn marginal(&self, y: f64, dt: f64) -> Result<(f64, f64)> {
        self(y, dt)
    }
}

fn upper_tail(m: &impl GaussianMarginal, y: f64, dt: f64, level: f64) -> Result<f64> {
    let (mean, var) = m.marginal(y, dt)?;
    if !(var > 0.0 && var.is_finite()) {
        return Err(Error::Numerical(format!("transition variance {var} is not positive")));
    }
    Ok(std_normal_sf((level - mean) / var.sqrt()))
}

/// First-passage density through `level` from `start = (y, s)`, from the
/// Fortet equation `P(X(t) > B | y, s) = int_s^t P(X(t) > B | B, tau) f(tau) dtau`.
/// The time integral uses the midpoint rule on `s + k h`, so the unknowns
/// sit at half steps; lattice values are averages of the neighbouring half
/// steps and `t_grid` values are interpolated linearly and clipped at zero.
pub fn fpt_univ_numeric(
    marginal: &impl GaussianMarginal,
    level: f64,
    start: (f64, f64),
    t_grid: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    let (y, s) = start;
    if !(level > y) {
        return Err(Error::Domain(format!("level {level} must lie above the start {y}")));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::param("h", format!("must be positive, got {h}")));
    }
    if t_grid.iter().any(|t| !t.is_finite() || *t < s) {
        return Err(Error::Domain("evaluation times must not precede the start".into()));
    }
    let t_max = t_grid.iter().cloned().fold(s, f64::max);
    let k_max = ((t_max - s) / h - 1e-9).ceil().max(0.0) as usize;
    let f = fortet_lattice(marginal, level, y, h, k_max)?;
    Ok(t_grid
        .iter()
        .map(|&t| {
            let x = (t - s) / h;
            let k = (x.floor() as usize).min(k_max);
            let frac = x - k as f64;
            let a = f[k];
            let b = if k < k_max { f[k + 1] } else { a };
            (a + frac * (b - a)).max(0.0)
        })
        .collect())
}

/// Lattice values `f(s + k h)` for `k = 0..=k_max` (unclipped, `f(s) = 0`).
pub(crate) fn fortet_lattice(
    marginal: &impl GaussianMarginal,
    level: f64,
    y: f64,
    h: f64,
    k_max: usize,
) -> Result<Vec<f64>> {
    // half-step unknowns g[k] at s + (k - 1/2) h, k = 1..=k_max + 1
    let n = k_max + 1;
    let q: Vec<f64> = (0..n)
        .map(|lag| upper_tail(marginal, level, (lag as f64 + 0.5) * h, level))
        .collect::<Result<_>>()?;
    let mut g = vec![0.0; n + 1];
    for k in 1..=n {
        let drive = upper_tail(marginal, y, k as f64 * h, level)?;
        let mut acc = 0.0;
        for rho in 1..k {
            acc += q[k - rho] * g[rho];
        }
        g[k] = (drive / h - acc) / q[0];
    }
    let mut f = vec![0.0; k_max + 1];
    for k in 1..=k_max {
        f[k] = 0.5 * (g[k] + g[k + 1]);
    }
    Ok(f)
}
