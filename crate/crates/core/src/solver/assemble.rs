use rayon::prelude::*;

use super::univariate::fortet_lattice;
use super::SolverOutput;
use crate::error::{Error, Result};
use crate::model::{Boundary, BoundaryKind, Component, DensityField, FieldMeta, GridSpec, Model, WienerParams};
use crate::quad::QuadSpec;
use crate::wiener::f_fpt_univ;

/// First-passage density of one component restarted on its slice after the
/// other component was absorbed: `f_Tj(t_late | X_j(t_early) = x)`.
#[derive(Debug, Clone)]
pub enum ConditionalFpt {
    /// Shifted inverse Gaussian.
    Wiener { params: WienerParams, boundary: Boundary },
    /// Univariate Fortet solutions tabulated per knot and lag; valid for
    /// time-homogeneous marginals and lattice-aligned arguments.
    Tabulated {
        h: f64,
        r: [f64; 2],
        levels: [f64; 2],
        tables: [Vec<Vec<f64>>; 2],
    },
}

impl ConditionalFpt {
    /// Analytic for Wiener, tabulated from the univariate solver otherwise.
    pub fn for_model(model: &Model, b: &Boundary, grid: &GridSpec) -> Result<Self> {
        if let Some(p) = model.as_wiener() {
            return Ok(ConditionalFpt::Wiener {
                params: *p,
                boundary: *b,
            });
        }
        let n = grid.n();
        let table = |c: Component| -> Result<Vec<Vec<f64>>> {
            let level = b.level(c);
            let marg = move |y: f64, dt: f64| model.marginal_transition(c, y, dt);
            grid.knots(c, level)
                .par_iter()
                .enumerate()
                .map(|(v, &y)| {
                    if v == 0 {
                        Ok(vec![0.0; n + 1])
                    } else {
                        fortet_lattice(&marg, level, y, grid.h, n)
                    }
                })
                .collect()
        };
        Ok(ConditionalFpt::Tabulated {
            h: grid.h,
            r: [grid.r1, grid.r2],
            levels: [b.b1, b.b2],
            tables: [table(Component::One)?, table(Component::Two)?],
        })
    }

    pub fn eval(&self, j: Component, t_late: f64, x: f64, t_early: f64) -> Result<f64> {
        let dt = t_late - t_early;
        if !(dt > 0.0) {
            return Ok(0.0);
        }
        match self {
            ConditionalFpt::Wiener { params, boundary } => {
                if x >= boundary.level(j) {
                    return Ok(0.0);
                }
                f_fpt_univ(j, t_late, params, boundary, Some((x, t_early)))
            }
            ConditionalFpt::Tabulated { h, r, levels, tables } => {
                let ji = j.index();
                let index = |v: f64, what: &str| -> Result<usize> {
                    let k = v.round();
                    if k < 0.0 || (v - k).abs() > 1e-6 {
                        return Err(Error::Domain(format!("{what} is not on the tabulation lattice")));
                    }
                    Ok(k as usize)
                };
                let v = index((levels[ji] - x) / r[ji], "start")?;
                let lag = index(dt / h, "elapsed time")?;
                let table = &tables[ji];
                if v >= table.len() || lag >= table[v].len() {
                    return Err(Error::Domain("argument outside the tabulated range".into()));
                }
                Ok(table[v][lag].max(0.0))
            }
        }
    }
}

fn check_times(grid: &GridSpec, t_grid: &[f64]) -> Result<Vec<usize>> {
    t_grid
        .iter()
        .map(|&t| {
            grid.time_index(t)
                .ok_or_else(|| Error::Domain(format!("time {t} is not a knot time within the horizon")))
        })
        .collect()
}

fn time_field(t_grid: &[f64], values: Vec<f64>, label: &str) -> Result<DensityField> {
    DensityField::new(
        t_grid.to_vec(),
        t_grid.to_vec(),
        values,
        FieldMeta {
            label: label.into(),
            axis1_name: "t1".into(),
            axis2_name: "t2".into(),
            notes: vec!["diagonal cells are not resolved by the lattice and hold no value".into()],
        },
    )
}

/// Joint density of `(T1, T2)` under absorbing levels on `t_grid x t_grid`,
/// by the rectangle rule on the solver's own knots. Diagonal cells are `NaN`.
pub fn assemble_absorbing<F>(
    output: &SolverOutput,
    model: &Model,
    b: &Boundary,
    t_grid: &[f64],
    fpt_conditional: F,
) -> Result<DensityField>
where
    F: Fn(Component, f64, f64, f64) -> Result<f64> + Sync,
{
    if b.kind != BoundaryKind::Absorbing {
        return Err(Error::Unsupported("absorbing assembly needs absorbing levels".into()));
    }
    model.validate()?;
    let grid = &output.grid;
    let idx = check_times(grid, t_grid)?;
    let knots = [grid.knots(Component::One, b.b1), grid.knots(Component::Two, b.b2)];
    let r = [grid.r1, grid.r2];
    let nt = t_grid.len();
    let values = (0..nt * nt)
        .into_par_iter()
        .map(|cell| -> Result<f64> {
            let (a, c) = (cell / nt, cell % nt);
            let (t1, t2) = (t_grid[a], t_grid[c]);
            if idx[a] == idx[c] {
                return Ok(f64::NAN);
            }
            // the component that passed first leaves the other on its slice
            let (first_k, late, t_early, t_late) = if idx[a] < idx[c] {
                (idx[a], Component::Two, t1, t2)
            } else {
                (idx[c], Component::One, t2, t1)
            };
            let field = output.field(late);
            let mut s = 0.0;
            for (v, &y) in knots[late.index()].iter().enumerate().skip(1) {
                let fv = field.get(v, first_k);
                if fv != 0.0 {
                    s += fpt_conditional(late, t_late, y, t_early)? * fv;
                }
            }
            Ok(r[late.index()] * s)
        })
        .collect::<Result<Vec<_>>>()?;
    time_field(t_grid, values, "f_(T1,T2) absorbing")
}

/// Joint density of `(T1, T2)` under crossing levels. `cross_density(j, x, t_late, y, t_early)`
/// is the density of `(X_i, T_j)` at `((x, B_j), t_late)` for the free
/// coordinate `x`, given the start on the slice of `j` with free coordinate
/// `y` at `t_early`. The inner integral over `x` runs over the mean plus or
/// minus `quad.c` standard deviations of the free coordinate with `quad.n`
/// trapezoid panels.
pub fn assemble_crossing<F>(
    output: &SolverOutput,
    model: &Model,
    b: &Boundary,
    t_grid: &[f64],
    cross_density: F,
    quad: &QuadSpec,
) -> Result<DensityField>
where
    F: Fn(Component, f64, f64, f64, f64) -> Result<f64> + Sync,
{
    if b.kind != BoundaryKind::Crossing {
        return Err(Error::Unsupported("crossing assembly needs crossing levels".into()));
    }
    model.validate()?;
    quad.validate()?;
    let grid = &output.grid;
    let idx = check_times(grid, t_grid)?;
    let knots = [grid.knots(Component::One, b.b1), grid.knots(Component::Two, b.b2)];
    let r = [grid.r1, grid.r2];
    let nt = t_grid.len();
    let values = (0..nt * nt)
        .into_par_iter()
        .map(|cell| -> Result<f64> {
            let (a, c) = (cell / nt, cell % nt);
            let (t1, t2) = (t_grid[a], t_grid[c]);
            if idx[a] == idx[c] {
                return Ok(f64::NAN);
            }
            let (first_k, late, t_early, t_late) = if idx[a] < idx[c] {
                (idx[a], Component::Two, t1, t2)
            } else {
                (idx[c], Component::One, t2, t1)
            };
            // the first component has crossed and keeps moving from its level
            let free = late.other();
            let (mean, var) = model.marginal_transition(free, b.level(free), t_late - t_early)?;
            let half = quad.c * var.sqrt();
            let step = 2.0 * half / quad.n as f64;
            let field = output.field(late);
            let mut s = 0.0;
            for (v, &y) in knots[late.index()].iter().enumerate().skip(1) {
                let fv = field.get(v, first_k);
                if fv == 0.0 {
                    continue;
                }
                let mut inner = 0.0;
                for q in 0..=quad.n {
                    let w = if q == 0 || q == quad.n { 0.5 } else { 1.0 };
                    let x = mean - half + q as f64 * step;
                    inner += w * cross_density(late, x, t_late, y, t_early)?;
                }
                s += inner * step * fv;
            }
            Ok(r[late.index()] * s)
        })
        .collect::<Result<Vec<_>>>()?;
    time_field(t_grid, values, "f_(T1,T2) crossing")
}
