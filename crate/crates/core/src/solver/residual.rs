use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{slice_point, SolverOutput};
use crate::error::{Error, Result};
use crate::model::{Boundary, Component, GaussianTransition, GridSpec, Model};
use crate::special::bvn_survival;

/// Which identity a probe checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualEquation {
    /// Survival at `(x1, B2)`.
    Survival1,
    /// Survival at `(B1, x2)`.
    Survival2,
    /// Free transition density at a point above both levels.
    Density,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualProbe {
    pub equation: ResidualEquation,
    pub x: [f64; 2],
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeResidual {
    pub probe: ResidualProbe,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub probes: Vec<ProbeResidual>,
    pub sup: f64,
    pub l2: f64,
}

/// A small fixed probe set: two knots close to each level and one point
/// above both levels, at the middle and the end of the horizon.
pub fn default_probes(grid: &GridSpec, b: &Boundary) -> Vec<ResidualProbe> {
    let n = grid.n();
    let mut ks = vec![n.div_ceil(2), n];
    ks.dedup();
    let mut out = Vec::new();
    for k in ks {
        let t = grid.time(k);
        for u in [1usize, 4] {
            let x1 = b.b1 - (u.min(grid.m1)) as f64 * grid.r1;
            let x2 = b.b2 - (u.min(grid.m2)) as f64 * grid.r2;
            out.push(ResidualProbe {
                equation: ResidualEquation::Survival1,
                x: [x1, b.b2],
                t,
            });
            out.push(ResidualProbe {
                equation: ResidualEquation::Survival2,
                x: [b.b1, x2],
                t,
            });
        }
        out.push(ResidualProbe {
            equation: ResidualEquation::Density,
            x: [b.b1 + 2.0 * grid.r1, b.b2 + 2.0 * grid.r2],
            t,
        });
    }
    out
}

fn density(x: [f64; 2], tr: &GaussianTransition) -> f64 {
    let det = tr.det();
    let d = [x[0] - tr.mean[0], x[1] - tr.mean[1]];
    let q = (tr.cov[1][1] * d[0] * d[0] - 2.0 * tr.cov[0][1] * d[0] * d[1] + tr.cov[0][0] * d[1] * d[1]) / det;
    (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
}

/// Residuals of the undiscretised system evaluated with the lattice fields of
/// `output`: time integrals by the right-endpoint Euler rule (the zero-lag
/// survival is the indicator `y > x_i` on the same slice and 0 across
/// slices), space integrals by the rectangle rule on the knots.
pub fn residual_volterra(
    output: &SolverOutput,
    model: &Model,
    b: &Boundary,
    probes: &[ResidualProbe],
) -> Result<ResidualReport> {
    let grid = &output.grid;
    let knots = [grid.knots(Component::One, b.b1), grid.knots(Component::Two, b.b2)];
    let r = [grid.r1, grid.r2];
    let res: Vec<ProbeResidual> = probes
        .par_iter()
        .map(|probe| -> Result<ProbeResidual> {
            let k = grid
                .time_index(probe.t)
                .filter(|&k| k >= 1)
                .ok_or_else(|| Error::Domain(format!("probe time {} is not a positive knot time", probe.t)))?;
            let x = match probe.equation {
                ResidualEquation::Survival1 => {
                    if probe.x[0] > b.b1 {
                        return Err(Error::Domain("survival probe must lie in the strip".into()));
                    }
                    [probe.x[0], b.b2]
                }
                ResidualEquation::Survival2 => {
                    if probe.x[1] > b.b2 {
                        return Err(Error::Domain("survival probe must lie in the strip".into()));
                    }
                    [b.b1, probe.x[1]]
                }
                ResidualEquation::Density => {
                    if !(probe.x[0] > b.b1 && probe.x[1] > b.b2) {
                        return Err(Error::Domain("density probe must lie above both levels".into()));
                    }
                    probe.x
                }
            };
            let eval = |tr: &GaussianTransition| -> Result<f64> {
                match probe.equation {
                    ResidualEquation::Density => Ok(density(x, tr)),
                    _ => bvn_survival(x, tr),
                }
            };
            let lhs = eval(&model.transition(model.start(), probe.t)?)?;
            let mut rhs = 0.0;
            for rho in 1..=k {
                let lag = k - rho;
                for j in Component::BOTH {
                    let field = output.field(j);
                    let mut s = 0.0;
                    for (v, &y) in knots[j.index()].iter().enumerate() {
                        let fv = field.get(v, rho);
                        if fv == 0.0 {
                            continue;
                        }
                        let kern = if lag == 0 {
                            match (probe.equation, j) {
                                (ResidualEquation::Survival1, Component::One) => (y > x[0]) as u8 as f64,
                                (ResidualEquation::Survival2, Component::Two) => (y > x[1]) as u8 as f64,
                                _ => 0.0,
                            }
                        } else {
                            let tr = model.transition(slice_point(j, y, b), lag as f64 * grid.h)?;
                            eval(&tr)?
                        };
                        s += kern * fv;
                    }
                    rhs += grid.h * r[j.index()] * s;
                }
            }
            Ok(ProbeResidual {
                probe: *probe,
                lhs,
                rhs,
                residual: (lhs - rhs).abs(),
            })
        })
        .collect::<Result<_>>()?;
    let sup = res.iter().fold(0.0f64, |a, p| a.max(p.residual));
    let l2 = res.iter().map(|p| p.residual * p.residual).sum::<f64>().sqrt();
    Ok(ResidualReport { probes: res, sup, l2 })
}
