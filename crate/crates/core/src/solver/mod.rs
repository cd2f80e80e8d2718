//! Discretised Volterra-Fredholm system for the densities of the surviving
//! coordinate at the first passage of the other one.
//!
//! Writing `D = -dFbar/dx_i >= 0` for survival derivatives of the free
//! process, the Euler discretisation reads, on knots `y_u = B_i - u r_i`,
//!
//! ```text
//! D0_1(u, k) = h w f1(u, k)
//!            + h sum_{rho=1}^{k-1} [ r1 sum_v D11(k-rho)[u][v] f1(v, rho)
//!                                  + r2 sum_v D12(k-rho)[u][v] f2(v, rho) ]
//! ```
//!
//! and symmetrically for `f2`. The zero-lag term comes from the degenerate
//! survival at coincident times; counting ties as survival gives `w = 1`.

mod assemble;
mod kernel;
mod residual;
mod univariate;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Boundary, Component, DensityField, FieldMeta, GridSpec, Model, WienerParams};
use crate::wiener::f_joint;

pub use assemble::{assemble_absorbing, assemble_crossing, ConditionalFpt};
pub use kernel::{kernel, lhs_derivative, slice_point, KernelCache};
pub use residual::{
    default_probes, residual_volterra, ProbeResidual, ResidualEquation, ResidualProbe,
    ResidualReport,
};
pub use univariate::{fpt_univ_numeric, GaussianMarginal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOptions {
    /// Weight of the zero-lag self term.
    #[serde(default = "default_lag0_weight")]
    pub lag0_weight: f64,
    /// Stop the `f1` sum in the `f2` update at `k - 2`.
    #[serde(default)]
    pub short_cross_sum: bool,
    /// Compute residual diagnostics at [`default_probes`].
    #[serde(default = "default_true")]
    pub residuals: bool,
    /// Upper bound on the kernel cache, in MiB.
    #[serde(default = "default_max_cache_mb")]
    pub max_cache_mb: f64,
}

fn default_max_cache_mb() -> f64 {
    2048.0
}

fn default_lag0_weight() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            lag0_weight: default_lag0_weight(),
            short_cross_sum: false,
            residuals: true,
            max_cache_mb: default_max_cache_mb(),
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.lag0_weight.is_finite() && self.lag0_weight > 0.0) {
            return Err(Error::param(
                "lag0_weight",
                format!("must be positive, got {}", self.lag0_weight),
            ));
        }
        if !(self.max_cache_mb.is_finite() && self.max_cache_mb > 0.0) {
            return Err(Error::param(
                "max_cache_mb",
                format!("must be positive, got {}", self.max_cache_mb),
            ));
        }
        Ok(())
    }

    /// Fails when the kernel cache of `grid` would exceed the budget.
    pub fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        let mb = KernelCache::bytes_for(grid) as f64 / (1024.0 * 1024.0);
        if mb > self.max_cache_mb {
            return Err(Error::param(
                "max_cache_mb",
                format!(
                    "grid needs a {mb:.0} MiB kernel cache, above the {:.0} MiB budget",
                    self.max_cache_mb
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub negative_count: usize,
    pub min_value: f64,
    /// `h r`-weighted sum of the negative values.
    pub negative_mass: f64,
    /// Largest `|f(., t1)|` divided by the largest `|f(., t2)|`.
    pub first_step_ratio: f64,
    /// Set when `first_step_ratio` exceeds 10.
    pub first_step_flagged: bool,
    /// `h r`-weighted total of both fields.
    pub total_mass: f64,
    pub residual: Option<ResidualReport>,
    /// Wall-clock seconds; informative only, never written to outputs.
    #[serde(skip)]
    pub elapsed: f64,
}

/// Solved densities on the knot lattice. `f1` approximates `f_(X1^a, T2)` on
/// `(y_u, t_k)` with `y_u = B1 - u r1`, `f2` approximates `f_(X2^a, T1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOutput {
    pub grid: GridSpec,
    pub f1: DensityField,
    pub f2: DensityField,
    pub diagnostics: SolverDiagnostics,
}

impl SolverOutput {
    /// Wraps precomputed lattice fields (time-major rows per component).
    pub fn from_lattice(
        grid: GridSpec,
        b: &Boundary,
        f1: &[Vec<f64>],
        f2: &[Vec<f64>],
        label: &str,
    ) -> Result<Self> {
        let field = |c: Component, f: &[Vec<f64>]| -> Result<DensityField> {
            let knots = grid.knots(c, b.level(c));
            let times = grid.times();
            if f.len() != times.len() || f.iter().any(|row| row.len() != knots.len()) {
                return Err(Error::Numerical("lattice field has the wrong shape".into()));
            }
            let mut values = Vec::with_capacity(knots.len() * times.len());
            for u in 0..knots.len() {
                values.extend(f.iter().map(|row| row[u]));
            }
            let (name, other) = match c {
                Component::One => ("x1", "T2"),
                Component::Two => ("x2", "T1"),
            };
            DensityField::new(
                knots,
                times,
                values,
                FieldMeta {
                    label: format!("{label} f_({name},{other})"),
                    axis1_name: name.into(),
                    axis2_name: "t".into(),
                    notes: Vec::new(),
                },
            )
        };
        Ok(SolverOutput {
            grid,
            f1: field(Component::One, f1)?,
            f2: field(Component::Two, f2)?,
            diagnostics: SolverDiagnostics::default(),
        })
    }

    pub fn field(&self, c: Component) -> &DensityField {
        match c {
            Component::One => &self.f1,
            Component::Two => &self.f2,
        }
    }

    /// Value at knot `u`, time index `k`.
    pub fn value(&self, c: Component, u: usize, k: usize) -> f64 {
        self.field(c).get(u, k)
    }
}

pub fn solve(model: &Model, b: &Boundary, grid: &GridSpec) -> Result<SolverOutput> {
    solve_with(model, b, grid, &SolverOptions::default())
}

pub fn solve_with(
    model: &Model,
    b: &Boundary,
    grid: &GridSpec,
    opts: &SolverOptions,
) -> Result<SolverOutput> {
    let started = Instant::now();
    model.validate()?;
    b.validate_for(model.start())?;
    opts.validate()?;
    opts.check_grid(grid)?;
    let n = grid.n();
    let h = grid.h;
    let knots = [grid.knots(Component::One, b.b1), grid.knots(Component::Two, b.b2)];
    let m = [knots[0].len(), knots[1].len()];
    let cache = KernelCache::build(model, b, grid, n.saturating_sub(1))?;

    // driving terms D0_i(u, k), k = 1..=n
    let drive: Vec<[Vec<f64>; 2]> = (1..=n)
        .into_par_iter()
        .map(|k| -> Result<[Vec<f64>; 2]> {
            let t = grid.time(k);
            let row = |c: Component| -> Result<Vec<f64>> {
                knots[c.index()]
                    .iter()
                    .map(|&y| Ok(-lhs_derivative(c, y, t, model, b)?))
                    .collect()
            };
            Ok([row(Component::One)?, row(Component::Two)?])
        })
        .collect::<Result<_>>()?;

    let r = [grid.r1, grid.r2];
    let w = opts.lag0_weight;
    let mut f: [Vec<Vec<f64>>; 2] = [vec![vec![0.0; m[0]]], vec![vec![0.0; m[1]]]];
    for k in 1..=n {
        let mut next: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for i in Component::BOTH {
            let ii = i.index();
            let fs = &f;
            let d0 = &drive[k - 1][ii];
            let cache = &cache;
            next[ii] = (0..m[ii])
                .into_par_iter()
                .map(|u| {
                    let mut acc = 0.0;
                    for rho in 1..k {
                        let lag = k - rho;
                        for j in Component::BOTH {
                            if opts.short_cross_sum
                                && i == Component::Two
                                && j == Component::One
                                && rho == k - 1
                            {
                                continue;
                            }
                            let row = cache.row(i, j, lag, u);
                            let src = &fs[j.index()][rho];
                            let dot: f64 = row.iter().zip(src).map(|(a, b)| a * b).sum();
                            acc += r[j.index()] * dot;
                        }
                    }
                    (d0[u] / h - acc) / w
                })
                .collect();
        }
        let [a, c] = next;
        f[0].push(a);
        f[1].push(c);
    }
    for (c, rows) in f.iter().enumerate() {
        for row in rows {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!(
                    "solver produced a non-finite value for component {}",
                    c + 1
                )));
            }
        }
    }

    let mut out = SolverOutput::from_lattice(*grid, b, &f[0], &f[1], "solver")?;
    let mut diag = SolverDiagnostics {
        min_value: f64::INFINITY,
        ..Default::default()
    };
    for (c, rows) in f.iter().enumerate() {
        for row in rows.iter().skip(1) {
            for &v in row {
                diag.total_mass += v * h * r[c];
                diag.min_value = diag.min_value.min(v);
                if v < 0.0 {
                    diag.negative_count += 1;
                    diag.negative_mass += v * h * r[c];
                }
            }
        }
    }
    if n >= 2 {
        let peak = |k: usize| {
            f.iter()
                .flat_map(|rows| rows[k].iter())
                .fold(0.0f64, |a, v| a.max(v.abs()))
        };
        let (p1, p2) = (peak(1), peak(2));
        diag.first_step_ratio = if p2 > 0.0 { p1 / p2 } else { 0.0 };
        diag.first_step_flagged = diag.first_step_ratio > 10.0;
    }
    if opts.residuals {
        let probes = default_probes(grid, b);
        diag.residual = Some(residual_volterra(&out, model, b, &probes)?);
    }
    diag.elapsed = started.elapsed().as_secs_f64();
    out.diagnostics = diag;
    Ok(out)
}

/// Closed-form `f_(X_i^a, T_j)` of the Wiener model on the solver lattice.
pub fn wiener_reference(p: &WienerParams, b: &Boundary, grid: &GridSpec) -> Result<SolverOutput> {
    let n = grid.n();
    let field = |c: Component| -> Result<Vec<Vec<f64>>> {
        let knots = grid.knots(c, b.level(c));
        (0..=n)
            .into_par_iter()
            .map(|k| {
                if k == 0 {
                    return Ok(vec![0.0; knots.len()]);
                }
                knots
                    .iter()
                    .map(|&y| f_joint(c, y, grid.time(k), p, b))
                    .collect()
            })
            .collect()
    };
    SolverOutput::from_lattice(*grid, b, &field(Component::One)?, &field(Component::Two)?, "analytic")
}
