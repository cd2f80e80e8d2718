//! Euler-Maruyama simulation of the two passage times.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{em_step_distribution, Boundary, BoundaryKind, Component, DensityField, FieldMeta, Model};

/// Fewest uncensored pairs [`density_estimate`] accepts.
pub const MIN_UNCENSORED: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_paths: usize,
    pub step: f64,
    pub horizon: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "yes")]
    pub bridge_correction: bool,
    /// Order simultaneous crossings by bisecting the step with bridge midpoints.
    #[serde(default)]
    pub tie_bisection: bool,
}

fn yes() -> bool {
    true
}

impl SimConfig {
    pub fn new(n_paths: usize, step: f64, horizon: f64, seed: u64) -> Result<Self> {
        let c = SimConfig {
            n_paths,
            step,
            horizon,
            seed,
            bridge_correction: true,
            tie_bisection: false,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 1 {
            return Err(Error::param("n_paths", "must be at least 1"));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::param("step", format!("must be positive, got {}", self.step)));
        }
        if !(self.horizon.is_finite() && self.horizon >= self.step) {
            return Err(Error::param(
                "horizon",
                format!("must be at least the step, got {}", self.horizon),
            ));
        }
        Ok(())
    }

    fn n_steps(&self) -> usize {
        ((self.horizon / self.step) - 1e-9).ceil() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum First {
    One,
    Two,
    Tie,
}

impl First {
    fn label(self) -> &'static str {
        match self {
            First::One => "1",
            First::Two => "2",
            First::Tie => "tie",
        }
    }
}

/// Passage times of one path. A censored time holds the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FptSample {
    pub t1: f64,
    pub t2: f64,
    /// `None` when neither component crossed.
    pub first: Option<First>,
    pub censored1: bool,
    pub censored2: bool,
}

impl FptSample {
    pub fn t(&self, c: Component) -> f64 {
        match c {
            Component::One => self.t1,
            Component::Two => self.t2,
        }
    }

    pub fn censored(&self, c: Component) -> bool {
        match c {
            Component::One => self.censored1,
            Component::Two => self.censored2,
        }
    }

    pub fn uncensored(&self) -> bool {
        !self.censored1 && !self.censored2
    }
}

/// Probability that a Brownian bridge from `a` to `b` over `dt` with
/// variance rate `s2` exceeds `level`, both ends below it.
fn bridge_prob(a: f64, b: f64, level: f64, s2: f64, dt: f64) -> f64 {
    (-2.0 * (level - a) * (level - b) / (s2 * dt)).exp()
}

struct Stepper<'a> {
    model: &'a Model,
    levels: [f64; 2],
    chol: [[f64; 2]; 2],
    rate: [f64; 2],
    bridge: bool,
}

impl Stepper<'_> {
    fn normals(&self, rng: &mut ChaCha8Rng, scale: f64) -> [f64; 2] {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let l = self.chol;
        [scale * l[0][0] * z1, scale * (l[1][0] * z1 + l[1][1] * z2)]
    }

    /// Whether component `i` crossed between the values `a` and `b`; the
    /// uniform is always consumed so streams stay coupled.
    fn crossed(&self, i: usize, a: f64, b: f64, dt: f64, rng: &mut ChaCha8Rng) -> bool {
        let u: f64 = rng.random();
        if b > self.levels[i] {
            return true;
        }
        self.bridge && u < bridge_prob(a, b, self.levels[i], self.rate[i], dt)
    }

    /// Splits a step in which both components crossed. Returns the order
    /// and crossing times once the halves separate them. Bridge conditioning
    /// of crossings detected without an endpoint above the level is ignored.
    fn bisect(
        &self,
        mut a: [f64; 2],
        mut b: [f64; 2],
        mut t0: f64,
        mut dt: f64,
        rng: &mut ChaCha8Rng,
    ) -> Option<(First, [f64; 2])> {
        for _ in 0..16 {
            let half = 0.5 * dt;
            let noise = self.normals(rng, 0.5 * dt.sqrt());
            let mid = [0.5 * (a[0] + b[0]) + noise[0], 0.5 * (a[1] + b[1]) + noise[1]];
            let early = [
                self.crossed(0, a[0], mid[0], half, rng),
                self.crossed(1, a[1], mid[1], half, rng),
            ];
            match early {
                [true, true] => {
                    b = mid;
                }
                [false, false] => {
                    a = mid;
                    t0 += half;
                }
                [e1, _] => {
                    let (t_early, t_late) = (t0 + 0.5 * half, t0 + 1.5 * half);
                    return Some(if e1 {
                        (First::One, [t_early, t_late])
                    } else {
                        (First::Two, [t_late, t_early])
                    });
                }
            }
            dt = half;
        }
        None
    }
}

fn simulate_path(st: &Stepper, b: &Boundary, cfg: &SimConfig, path: u64) -> FptSample {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(path);
    let absorbing = b.kind == BoundaryKind::Absorbing;
    let mut x = st.model.start();
    let mut t = [f64::NAN; 2];
    let mut first = None;
    let n = cfg.n_steps();
    let sq = cfg.step.sqrt();
    for k in 0..n {
        let t0 = k as f64 * cfg.step;
        let t1 = ((k + 1) as f64 * cfg.step).min(cfg.horizon);
        let dt = t1 - t0;
        let drift = st.model.drift(x);
        let z = st.normals(&mut rng, if dt == cfg.step { sq } else { dt.sqrt() });
        let mut next = [x[0] + drift[0] * dt + z[0], x[1] + drift[1] * dt + z[1]];
        let mut hit = [false; 2];
        for i in 0..2 {
            let done = !t[i].is_nan();
            if done && absorbing {
                next[i] = st.levels[i];
                let _: f64 = rng.random();
            } else {
                let c = st.crossed(i, x[i], next[i], dt, &mut rng);
                hit[i] = !done && c;
            }
        }
        match hit {
            [true, true] => {
                let resolved = if cfg.tie_bisection {
                    st.bisect(x, next, t0, dt, &mut rng)
                } else {
                    None
                };
                let (f, times) = resolved.unwrap_or((First::Tie, [t1, t1]));
                t = times;
                first.get_or_insert(f);
            }
            [h1, h2] => {
                for (i, h) in [h1, h2].into_iter().enumerate() {
                    if h {
                        t[i] = t0 + 0.5 * dt;
                        first.get_or_insert(if i == 0 { First::One } else { First::Two });
                    }
                }
            }
        }
        for i in 0..2 {
            if hit[i] && absorbing {
                next[i] = st.levels[i];
            }
        }
        x = next;
        if !t[0].is_nan() && !t[1].is_nan() {
            break;
        }
    }
    FptSample {
        t1: if t[0].is_nan() { cfg.horizon } else { t[0] },
        t2: if t[1].is_nan() { cfg.horizon } else { t[1] },
        first,
        censored1: t[0].is_nan(),
        censored2: t[1].is_nan(),
    }
}

/// Simulates `cfg.n_paths` independent paths. Path `j` draws from its own
/// ChaCha stream `(seed, j)`, so the output does not depend on scheduling.
pub fn simulate(model: &Model, b: &Boundary, cfg: &SimConfig) -> Result<Vec<FptSample>> {
    model.validate()?;
    b.validate_for(model.start())?;
    cfg.validate()?;
    let step = em_step_distribution(model, model.start(), 1.0)?;
    let rate = model.covariance_rate();
    let st = Stepper {
        model,
        levels: b.levels(),
        chol: step.cholesky()?,
        rate: [rate[0][0], rate[1][1]],
        bridge: cfg.bridge_correction,
    };
    Ok((0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|j| simulate_path(&st, b, cfg, j))
        .collect())
}

pub fn samples_to_csv(samples: &[FptSample]) -> String {
    let mut s = String::from("t1,t2,first,censored1,censored2\n");
    for x in samples {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            x.t1,
            x.t2,
            x.first.map(First::label).unwrap_or(""),
            x.censored1 as u8,
            x.censored2 as u8
        );
    }
    s
}

/// Density of uncensored pairs on the square cells bounded by `edges`
/// (ascending, shared by both axes): a histogram, or a product Gaussian
/// kernel estimate at the cell centres when `bandwidth` is given. Values
/// integrate to the uncensored fraction of `samples` falling in the grid
/// (for the kernel estimate, exactly to the uncensored fraction).
pub fn density_estimate(samples: &[FptSample], edges: &[f64], bandwidth: Option<f64>) -> Result<DensityField> {
    if samples.is_empty() {
        return Err(Error::Domain("no samples".into()));
    }
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) || edges.iter().any(|e| !e.is_finite()) {
        return Err(Error::param("t_grid", "cell edges must be finite and strictly increasing"));
    }
    let pairs: Vec<(f64, f64)> = samples.iter().filter(|s| s.uncensored()).map(|s| (s.t1, s.t2)).collect();
    if pairs.len() < MIN_UNCENSORED {
        return Err(Error::Domain(format!(
            "{} uncensored pairs, need at least {MIN_UNCENSORED}",
            pairs.len()
        )));
    }
    let nc = edges.len() - 1;
    let centres: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let width: Vec<f64> = edges.windows(2).map(|w| w[1] - w[0]).collect();
    let total = samples.len() as f64;
    let values = match bandwidth {
        None => {
            let cell = |t: f64| -> Option<usize> {
                if t <= edges[0] || t > edges[nc] {
                    return None;
                }
                // cells are (e_k, e_{k+1}]
                Some(edges.partition_point(|&e| e < t) - 1)
            };
            let counts = pairs
                .par_chunks(1 << 16)
                .map(|chunk| {
                    let mut c = vec![0u64; nc * nc];
                    for &(a, b) in chunk {
                        if let (Some(i), Some(j)) = (cell(a), cell(b)) {
                            c[i * nc + j] += 1;
                        }
                    }
                    c
                })
                .reduce(|| vec![0u64; nc * nc], |mut x, y| {
                    x.iter_mut().zip(y).for_each(|(a, b)| *a += b);
                    x
                });
            (0..nc * nc)
                .map(|k| counts[k] as f64 / (total * width[k / nc] * width[k % nc]))
                .collect::<Vec<_>>()
        }
        Some(bw) => {
            if !(bw.is_finite() && bw > 0.0) {
                return Err(Error::param("bandwidth", format!("must be positive, got {bw}")));
            }
            let reach = 6.0 * bw;
            let norm = 1.0 / (2.0 * std::f64::consts::PI * bw * bw);
            let range = |t: f64| {
                let lo = centres.partition_point(|&c| c < t - reach);
                let hi = centres.partition_point(|&c| c <= t + reach);
                lo..hi
            };
            let raw = pairs
                .par_chunks(1 << 14)
                .map(|chunk| {
                    let mut v = vec![0.0; nc * nc];
                    for &(a, b) in chunk {
                        for i in range(a) {
                            let ga = (-0.5 * ((centres[i] - a) / bw).powi(2)).exp();
                            for j in range(b) {
                                let gb = (-0.5 * ((centres[j] - b) / bw).powi(2)).exp();
                                v[i * nc + j] += norm * ga * gb;
                            }
                        }
                    }
                    v
                })
                .collect::<Vec<_>>()
                .into_iter()
                .fold(vec![0.0; nc * nc], |mut x, y| {
                    x.iter_mut().zip(y).for_each(|(a, b)| *a += b);
                    x
                });
            let mass: f64 = (0..nc * nc).map(|k| raw[k] * width[k / nc] * width[k % nc]).sum();
            let target = pairs.len() as f64 / total;
            if !(mass > 0.0) {
                return Err(Error::Numerical("kernel estimate has no mass on the grid".into()));
            }
            raw.into_iter().map(|v| v * target / mass).collect()
        }
    };
    DensityField::new(
        centres.clone(),
        centres,
        values,
        FieldMeta {
            label: "f_(T1,T2) simulated".into(),
            axis1_name: "t1".into(),
            axis2_name: "t2".into(),
            notes: vec![format!("{} paths, {} uncensored pairs", samples.len(), pairs.len())],
        },
    )
}

/// Mean squared deviation from `reference` at the cell centres. Cells with
/// equal coordinates are skipped when `skip_diagonal` is set, as are cells
/// holding no value.
pub fn mse<F>(estimate: &DensityField, reference: F, skip_diagonal: bool) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    let (n1, n2) = estimate.shape();
    let cells: Vec<(usize, usize)> = (0..n1)
        .flat_map(|i| (0..n2).map(move |j| (i, j)))
        .filter(|&(i, j)| !(skip_diagonal && estimate.axis1[i] == estimate.axis2[j]))
        .filter(|&(i, j)| !estimate.get(i, j).is_nan())
        .collect();
    if cells.is_empty() {
        return Err(Error::Domain("no cells to compare".into()));
    }
    let sq = cells
        .par_iter()
        .map(|&(i, j)| -> Result<f64> {
            let want = reference(estimate.axis1[i], estimate.axis2[j])?;
            if !want.is_finite() {
                return Err(Error::Numerical(format!(
                    "reference is not finite at ({}, {})",
                    estimate.axis1[i], estimate.axis2[j]
                )));
            }
            Ok((estimate.get(i, j) - want).powi(2))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(sq.iter().sum::<f64>() / cells.len() as f64)
}
