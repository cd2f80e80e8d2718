//! Refinement ladders for the integral-equation solver and log-log order fits.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Boundary, Component, GridSpec, Model};
use crate::quad::QuadSpec;
use crate::solver::{
    assemble_absorbing, solve_with, wiener_reference, ConditionalFpt, SolverOptions, SolverOutput,
};
use crate::special::SeriesControl;
use crate::wiener::joint_fpt_grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// Closed-form lattice values (Wiener only).
    AnalyticWiener,
    /// Solver output at a quarter of the finest rung's steps.
    FineGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    MaxAbs,
    Mse,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::MaxAbs => "max_abs",
            Metric::Mse => "mse",
        }
    }
}

/// Which step a ladder refines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Time,
    Space,
    Joint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ladder {
    pub family: Family,
    /// `(h, r)` per rung, coarsest first.
    pub rungs: Vec<(f64, f64)>,
}

impl Ladder {
    pub fn halving(family: Family, base: (f64, f64), count: usize) -> Self {
        let rungs = (0..count)
            .map(|k| {
                let s = 0.5f64.powi(k as i32);
                match family {
                    Family::Time => (base.0 * s, base.1),
                    Family::Space => (base.0, base.1 * s),
                    Family::Joint => (base.0 * s, base.1 * s),
                }
            })
            .collect();
        Ladder { family, rungs }
    }

    /// The refined parameter of rung `k`.
    pub fn abscissa(&self, k: usize) -> f64 {
        let (h, r) = self.rungs[k];
        match self.family {
            Family::Space => r,
            _ => h,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.rungs.is_empty() {
            return Err(Error::param("ladder", "needs at least one rung"));
        }
        for &(h, r) in &self.rungs {
            if !(h.is_finite() && h > 0.0 && r.is_finite() && r > 0.0) {
                return Err(Error::param("ladder", format!("steps must be positive, got ({h}, {r})")));
            }
        }
        for w in self.rungs.windows(2) {
            let ((h0, r0), (h1, r1)) = (w[0], w[1]);
            let ok = match self.family {
                Family::Time => h1 < h0 && r1 == r0,
                Family::Space => r1 < r0 && h1 == h0,
                Family::Joint => h1 < h0 && r1 < r0,
            };
            if !ok {
                return Err(Error::param(
                    "ladder",
                    format!("{:?} rungs must strictly decrease in the refined step", self.family),
                ));
            }
        }
        Ok(())
    }
}

/// Refinement study around `base = (h0, r0)`. The spatial step applies to both
/// slices, and every rung keeps the truncation lengths `extent` and the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementPlan {
    pub base: (f64, f64),
    pub ladders: Vec<Ladder>,
    pub reference: Reference,
    pub horizon: f64,
    pub extent: [f64; 2],
    #[serde(default)]
    pub solver: SolverOptions,
}

impl RefinementPlan {
    /// Halving `h`, halving `r` and halving both, `count` rungs each, with
    /// the default truncation of the base grid.
    pub fn standard(model: &Model, base: (f64, f64), horizon: f64, count: usize) -> Result<Self> {
        let g = GridSpec::with_default_truncation(base.0, horizon, base.1, base.1, model)?;
        let reference = if model.as_wiener().is_some() {
            Reference::AnalyticWiener
        } else {
            Reference::FineGrid
        };
        Ok(RefinementPlan {
            base,
            ladders: [Family::Time, Family::Space, Family::Joint]
                .into_iter()
                .map(|f| Ladder::halving(f, base, count))
                .collect(),
            reference,
            horizon,
            extent: [g.m1 as f64 * base.1, g.m2 as f64 * base.1],
            solver: SolverOptions {
                residuals: false,
                ..Default::default()
            },
        })
    }

    pub fn validate(&self, model: &Model) -> Result<()> {
        if self.ladders.is_empty() {
            return Err(Error::param("ladder", "plan has no ladders"));
        }
        for l in &self.ladders {
            l.validate()?;
        }
        if !(self.extent.iter().all(|e| e.is_finite() && *e > 0.0)) {
            return Err(Error::param("extent", "truncation lengths must be positive"));
        }
        if self.reference == Reference::AnalyticWiener && model.as_wiener().is_none() {
            return Err(Error::Unsupported("the analytic reference needs a Wiener model".into()));
        }
        self.solver.validate()?;
        for (h, r) in self.rungs() {
            self.solver.check_grid(&self.grid(h, r)?)?;
        }
        if self.reference == Reference::FineGrid {
            let (h, r) = self.fine_steps();
            self.solver.check_grid(&self.grid(h, r)?)?;
        }
        Ok(())
    }

    fn rungs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.ladders.iter().flat_map(|l| l.rungs.iter().copied())
    }

    pub fn grid(&self, h: f64, r: f64) -> Result<GridSpec> {
        let m = |e: f64| ((e / r - 1e-9).ceil() as usize).max(1);
        GridSpec::new(h, self.horizon, r, r, m(self.extent[0]), m(self.extent[1]))
    }

    fn fine_steps(&self) -> (f64, f64) {
        let h = self.rungs().map(|x| x.0).fold(f64::INFINITY, f64::min);
        let r = self.rungs().map(|x| x.1).fold(f64::INFINITY, f64::min);
        (h / 4.0, r / 4.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub family: Family,
    pub h: f64,
    pub r: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Rungs used by the fit.
    pub used: usize,
    pub dropped_coarsest: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderTable {
    pub metric: Metric,
    pub rows: Vec<LadderRow>,
}

impl LadderTable {
    pub fn family(&self, f: Family) -> Vec<LadderRow> {
        self.rows.iter().filter(|r| r.family == f).copied().collect()
    }

    /// Log-log slope of the error against the refined step of family `f`.
    pub fn slope(&self, f: Family) -> Result<SlopeFit> {
        let pts: Vec<(f64, f64)> = self
            .family(f)
            .iter()
            .map(|r| (if f == Family::Space { r.r } else { r.h }, r.error))
            .collect();
        fit_slope(&pts)
    }

    /// Errors never grow by more than `slack` (relative) from one rung to
    /// the next within each family.
    pub fn is_monotone(&self, slack: f64) -> bool {
        [Family::Time, Family::Space, Family::Joint].iter().all(|&f| {
            self.family(f)
                .windows(2)
                .all(|w| w[1].error <= w[0].error * (1.0 + slack))
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("h,r,metric,error\n");
        for row in &self.rows {
            let _ = writeln!(s, "{},{},{},{:e}", row.h, row.r, self.metric.name(), row.error);
        }
        s
    }
}

/// Least-squares slope of `ln err` on `ln x`. With at least four points the
/// coarsest one (largest `x`) is dropped once when it sits more than three
/// times the RMS residual away from the fit through the finer points.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 2 {
        return Err(Error::param("ladder", "a slope needs at least two rungs"));
    }
    if points.iter().any(|&(x, e)| !(x > 0.0 && e > 0.0 && x.is_finite() && e.is_finite())) {
        return Err(Error::Numerical("slope fit needs positive finite errors".into()));
    }
    let mut pts: Vec<(f64, f64)> = points.iter().map(|&(x, e)| (x.ln(), e.ln())).collect();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    if pts[0].0 == pts[pts.len() - 1].0 {
        return Err(Error::param("ladder", "a slope needs distinct step sizes"));
    }
    let (slope, intercept) = least_squares(&pts);
    // The outlier test runs against a fit of the finer rungs alone: an in-sample
    // residual can never exceed sqrt(n - 1) times the RMS.
    if pts.len() >= 4 {
        let rest = &pts[1..];
        let (s, i) = least_squares(rest);
        let rms = (rest.iter().map(|&(x, y)| (y - i - s * x).powi(2)).sum::<f64>() / rest.len() as f64).sqrt();
        let (x0, y0) = pts[0];
        if (y0 - i - s * x0).abs() > 3.0 * rms.max(1e-9) {
            return Ok(SlopeFit {
                slope: s,
                intercept: i,
                used: rest.len(),
                dropped_coarsest: true,
            });
        }
    }
    Ok(SlopeFit {
        slope,
        intercept,
        used: pts.len(),
        dropped_coarsest: false,
    })
}

fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Error of `approx` against `reference` over all positive-time knots of
/// `approx`; `reference` may live on a finer lattice containing them.
pub fn lattice_error(approx: &SolverOutput, reference: &SolverOutput, metric: Metric) -> Result<f64> {
    let (ga, gr) = (&approx.grid, &reference.grid);
    let ratio = |a: f64, b: f64, what: &str| -> Result<usize> {
        let q = a / b;
        let k = q.round();
        if k < 1.0 || (q - k).abs() > 1e-6 {
            return Err(Error::Domain(format!("{what} of the reference lattice does not divide the rung's")));
        }
        Ok(k as usize)
    };
    let kt = ratio(ga.h, gr.h, "time step")?;
    let (mut max, mut ss, mut count) = (0.0f64, 0.0, 0usize);
    for c in Component::BOTH {
        let ks = ratio(ga.r(c), gr.r(c), "space step")?;
        let fa = approx.field(c);
        let fr = reference.field(c);
        let (ma, na) = fa.shape();
        let (mr, nr) = fr.shape();
        if (ma - 1) * ks > mr - 1 || (na - 1) * kt > nr - 1 {
            return Err(Error::Domain("reference lattice does not cover the rung".into()));
        }
        for u in 0..ma {
            for k in 1..na {
                let e = fa.get(u, k) - fr.get(u * ks, k * kt);
                max = max.max(e.abs());
                ss += e * e;
                count += 1;
            }
        }
    }
    Ok(match metric {
        Metric::MaxAbs => max,
        Metric::Mse => ss / count as f64,
    })
}

/// Runs every rung of `plan` and measures the lattice error against the
/// plan's reference. Rows keep the plan's ladder and rung order. Rungs run
/// one after another; each solve is parallel inside, and concurrent rungs
/// would multiply the peak memory.
pub fn error_ladder(model: &Model, b: &Boundary, plan: &RefinementPlan, metric: Metric) -> Result<LadderTable> {
    model.validate()?;
    b.validate_for(model.start())?;
    plan.validate(model)?;
    let fine = match plan.reference {
        Reference::FineGrid => {
            let (h, r) = plan.fine_steps();
            Some(solve_with(model, b, &plan.grid(h, r)?, &plan.solver)?)
        }
        Reference::AnalyticWiener => None,
    };
    let jobs: Vec<(Family, f64, f64)> = plan
        .ladders
        .iter()
        .flat_map(|l| l.rungs.iter().map(move |&(h, r)| (l.family, h, r)))
        .collect();
    let rows = jobs
        .iter()
        .map(|&(family, h, r)| -> Result<LadderRow> {
            let grid = plan.grid(h, r)?;
            let out = solve_with(model, b, &grid, &plan.solver)?;
            let error = match (&fine, model.as_wiener()) {
                (Some(f), _) => lattice_error(&out, f, metric)?,
                (None, Some(p)) => lattice_error(&out, &wiener_reference(p, b, &grid)?, metric)?,
                (None, None) => unreachable!("validated above"),
            };
            Ok(LadderRow { family, h, r, error })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LadderTable { metric, rows })
}

/// Mean squared error of the assembled joint first-passage density against
/// the closed form at every off-diagonal pair of positive knot times.
pub fn assembled_mse(output: &SolverOutput, model: &Model, b: &Boundary, quad: &QuadSpec) -> Result<f64> {
    let p = model
        .as_wiener()
        .ok_or_else(|| Error::Unsupported("the closed form needs a Wiener model".into()))?;
    let ts: Vec<f64> = (1..=output.grid.n()).map(|k| output.grid.time(k)).collect();
    let cf = ConditionalFpt::for_model(model, b, &output.grid)?;
    let approx = assemble_absorbing(output, model, b, &ts, |j, t, x, s| cf.eval(j, t, x, s))?;
    let exact = joint_fpt_grid(&ts, &ts, p, b, quad, &SeriesControl::default())?;
    let nt = ts.len();
    let (mut ss, mut count) = (0.0, 0usize);
    for a in 0..nt {
        for c in 0..nt {
            if a != c {
                ss += (approx.get(a, c) - exact[a * nt + c]).powi(2);
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::Domain("need at least two positive knot times".into()));
    }
    Ok(ss / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let pts: Vec<(f64, f64)> = (0..5).map(|k| {
            let x = 0.1 * 0.5f64.powi(k);
            (x, 3.0 * x)
        }).collect();
        let fit = fit_slope(&pts).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!(!fit.dropped_coarsest);
    }

    #[test]
    fn outlying_coarsest_rung_is_dropped() {
        let mut pts: Vec<(f64, f64)> = (0..6).map(|k| {
            let x = 0.1 * 0.5f64.powi(k);
            (x, x * (1.0 + 0.01 * (k as f64).sin()))
        }).collect();
        pts[0].1 *= 30.0;
        let fit = fit_slope(&pts).unwrap();
        assert!(fit.dropped_coarsest);
        assert_eq!(fit.used, 5);
        assert!((fit.slope - 1.0).abs() < 0.05);
    }

    #[test]
    fn ladders_must_refine() {
        let bad = Ladder {
            family: Family::Time,
            rungs: vec![(0.1, 0.2), (0.1, 0.2)],
        };
        assert!(bad.validate().is_err());
        assert!(Ladder::halving(Family::Joint, (0.1, 0.2), 3).validate().is_ok());
    }
}
