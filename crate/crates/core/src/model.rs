//! Process definitions, boundaries, grids and the Gaussian transition law.
//!
//! Both supported processes are Gaussian with constant diffusion, so every
//! consumer (solver, Monte Carlo, analytics) talks to them through
//! [`GaussianTransition`]: the mean and covariance of `X(s + dt)` given
//! `X(s) = y`.
//!
//! Ornstein-Uhlenbeck moments follow from the linear SDE
//! `dX = (mu - X / theta) dt + S dW` with a relaxation time shared by both
//! components. With `a = exp(-dt / theta)`,
//!
//! ```text
//! mean_i = mu_i theta + (y_i - mu_i theta) a
//! cov    = (theta / 2) (1 - a^2) S S'
//! ```
//!
//! The covariance formula is `int_0^dt exp(-2u/theta) du * S S'`, valid because
//! the drift matrix `-I / theta` commutes with everything.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the two coordinates of the bivariate process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Component {
    One,
    Two,
}

impl Component {
    pub const BOTH: [Component; 2] = [Component::One, Component::Two];

    pub fn other(self) -> Component {
        match self {
            Component::One => Component::Two,
            Component::Two => Component::One,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Component::One => 0,
            Component::Two => 1,
        }
    }

    pub fn from_number(i: u8) -> Result<Component> {
        match i {
            1 => Ok(Component::One),
            2 => Ok(Component::Two),
            _ => Err(Error::param("component", format!("expected 1 or 2, got {i}"))),
        }
    }
}

fn check_finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite, got {v}")))
    }
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive, got {v}")))
    }
}

pub(crate) fn check_dt(dt: f64) -> Result<()> {
    if dt.is_finite() && dt > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("elapsed time must be positive, got {dt}")))
    }
}

/// Raw field set of a correlated Wiener process, as written in config files.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WienerSpec {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho: f64,
    #[serde(default)]
    pub x01: f64,
    #[serde(default)]
    pub x02: f64,
}

/// Bivariate Wiener process with drift `(mu1, mu2)`, volatilities
/// `(sigma1, sigma2)` and correlation `rho`, plus the constants used by the
/// closed-form densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WienerSpec", into = "WienerSpec")]
pub struct WienerParams {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho: f64,
    pub x01: f64,
    pub x02: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub n1: f64,
    pub n2: f64,
    /// Wedge angle `arccos(-rho)`, in `(0, pi)`.
    pub alpha: f64,
}

impl WienerParams {
    pub fn new(mu: [f64; 2], sigma: [f64; 2], rho: f64, x0: [f64; 2]) -> Result<Self> {
        WienerSpec {
            mu1: mu[0],
            mu2: mu[1],
            sigma1: sigma[0],
            sigma2: sigma[1],
            rho,
            x01: x0[0],
            x02: x0[1],
        }
        .try_into()
    }

    pub fn mu(&self, c: Component) -> f64 {
        match c {
            Component::One => self.mu1,
            Component::Two => self.mu2,
        }
    }

    pub fn sigma(&self, c: Component) -> f64 {
        match c {
            Component::One => self.sigma1,
            Component::Two => self.sigma2,
        }
    }

    pub fn x0(&self, c: Component) -> f64 {
        match c {
            Component::One => self.x01,
            Component::Two => self.x02,
        }
    }

    pub fn k(&self, c: Component) -> f64 {
        match c {
            Component::One => self.k1,
            Component::Two => self.k2,
        }
    }

    pub fn n(&self, c: Component) -> f64 {
        match c {
            Component::One => self.n1,
            Component::Two => self.n2,
        }
    }

    pub fn is_driftless(&self) -> bool {
        self.mu1 == 0.0 && self.mu2 == 0.0
    }

    /// Per-unit-time covariance matrix.
    pub fn covariance_rate(&self) -> [[f64; 2]; 2] {
        let c = self.rho * self.sigma1 * self.sigma2;
        [[self.sigma1 * self.sigma1, c], [c, self.sigma2 * self.sigma2]]
    }

    /// The same process with the two coordinates exchanged.
    pub fn swapped(&self) -> Self {
        WienerParams::new(
            [self.mu2, self.mu1],
            [self.sigma2, self.sigma1],
            self.rho,
            [self.x02, self.x01],
        )
        .expect("swapping preserves validity")
    }

    /// Same parameters started from a different point.
    pub fn with_start(&self, x0: [f64; 2]) -> Result<Self> {
        WienerParams::new([self.mu1, self.mu2], [self.sigma1, self.sigma2], self.rho, x0)
    }
}

impl TryFrom<WienerSpec> for WienerParams {
    type Error = Error;

    fn try_from(s: WienerSpec) -> Result<Self> {
        check_finite("mu1", s.mu1)?;
        check_finite("mu2", s.mu2)?;
        check_positive("sigma1", s.sigma1)?;
        check_positive("sigma2", s.sigma2)?;
        check_finite("x01", s.x01)?;
        check_finite("x02", s.x02)?;
        if !(s.rho.is_finite() && s.rho.abs() < 1.0) {
            return Err(Error::param("rho", format!("must lie in (-1, 1), got {}", s.rho)));
        }
        let (s1, s2, rho) = (s.sigma1, s.sigma2, s.rho);
        let one_m = 1.0 - rho * rho;
        let k1 = (s2 * s.mu1 - s1 * s.mu2 * rho) / (s1 * s1 * s2 * one_m);
        let k2 = (s1 * s.mu2 - s2 * s.mu1 * rho) / (s1 * s2 * s2 * one_m);
        let k3 = s1 * s2 * one_m.sqrt();
        let n1 = (s1 * s.mu2 - s2 * s.mu1 * rho) / (2.0 * s1);
        let n2 = (s2 * s.mu1 - s1 * s.mu2 * rho) / (2.0 * s2);
        Ok(WienerParams {
            mu1: s.mu1,
            mu2: s.mu2,
            sigma1: s1,
            sigma2: s2,
            rho,
            x01: s.x01,
            x02: s.x02,
            k1,
            k2,
            k3,
            n1,
            n2,
            alpha: (-rho).acos(),
        })
    }
}

impl From<WienerParams> for WienerSpec {
    fn from(p: WienerParams) -> Self {
        WienerSpec {
            mu1: p.mu1,
            mu2: p.mu2,
            sigma1: p.sigma1,
            sigma2: p.sigma2,
            rho: p.rho,
            x01: p.x01,
            x02: p.x02,
        }
    }
}

/// Bivariate Ornstein-Uhlenbeck process `dX_i = (mu_i - X_i / theta) dt + (S dW)_i`
/// with symmetric positive-definite diffusion matrix `S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuParams {
    pub mu1: f64,
    pub mu2: f64,
    pub theta: f64,
    pub sigma11: f64,
    pub sigma12: f64,
    pub sigma22: f64,
    #[serde(default)]
    pub x01: f64,
    #[serde(default)]
    pub x02: f64,
}

impl OuParams {
    pub fn new(mu: [f64; 2], theta: f64, sigma: [[f64; 2]; 2], x0: [f64; 2]) -> Result<Self> {
        if sigma[0][1] != sigma[1][0] {
            return Err(Error::param("sigma", "diffusion matrix must be symmetric"));
        }
        let p = OuParams {
            mu1: mu[0],
            mu2: mu[1],
            theta,
            sigma11: sigma[0][0],
            sigma12: sigma[0][1],
            sigma22: sigma[1][1],
            x01: x0[0],
            x02: x0[1],
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("mu1", self.mu1)?;
        check_finite("mu2", self.mu2)?;
        check_positive("theta", self.theta)?;
        check_finite("sigma11", self.sigma11)?;
        check_finite("sigma12", self.sigma12)?;
        check_finite("sigma22", self.sigma22)?;
        check_finite("x01", self.x01)?;
        check_finite("x02", self.x02)?;
        let det = self.sigma11 * self.sigma22 - self.sigma12 * self.sigma12;
        if !(self.sigma11 > 0.0 && det > 0.0) {
            return Err(Error::param(
                "sigma",
                format!("diffusion matrix must be positive-definite (det = {det})"),
            ));
        }
        Ok(())
    }

    pub fn mu(&self, c: Component) -> f64 {
        match c {
            Component::One => self.mu1,
            Component::Two => self.mu2,
        }
    }

    pub fn x0(&self, c: Component) -> f64 {
        match c {
            Component::One => self.x01,
            Component::Two => self.x02,
        }
    }

    /// `S S'`, the instantaneous covariance rate.
    pub fn covariance_rate(&self) -> [[f64; 2]; 2] {
        let (a, b, d) = (self.sigma11, self.sigma12, self.sigma22);
        [[a * a + b * b, a * b + b * d], [a * b + b * d, b * b + d * d]]
    }

    /// Asymptotic mean `mu_i * theta`.
    pub fn asymptote(&self, c: Component) -> f64 {
        self.mu(c) * self.theta
    }
}

/// Boundary behaviour after the first component reaches its level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Absorbing,
    Crossing,
}

/// Constant levels `(b1, b2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Boundary {
    pub b1: f64,
    pub b2: f64,
    pub kind: BoundaryKind,
}

impl Boundary {
    pub fn absorbing(b1: f64, b2: f64) -> Self {
        Boundary {
            b1,
            b2,
            kind: BoundaryKind::Absorbing,
        }
    }

    pub fn crossing(b1: f64, b2: f64) -> Self {
        Boundary {
            b1,
            b2,
            kind: BoundaryKind::Crossing,
        }
    }

    pub fn level(&self, c: Component) -> f64 {
        match c {
            Component::One => self.b1,
            Component::Two => self.b2,
        }
    }

    pub fn levels(&self) -> [f64; 2] {
        [self.b1, self.b2]
    }

    pub fn swapped(&self) -> Self {
        Boundary {
            b1: self.b2,
            b2: self.b1,
            kind: self.kind,
        }
    }

    /// Both levels must lie strictly above the starting point.
    pub fn validate_for(&self, x0: [f64; 2]) -> Result<()> {
        check_finite("b1", self.b1)?;
        check_finite("b2", self.b2)?;
        if !(self.b1 > x0[0] && self.b2 > x0[1]) {
            return Err(Error::param(
                "boundary",
                format!(
                    "levels ({}, {}) must exceed the start ({}, {})",
                    self.b1, self.b2, x0[0], x0[1]
                ),
            ));
        }
        Ok(())
    }
}

/// Mean and covariance of a Gaussian law on the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianTransition {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

impl GaussianTransition {
    pub fn new(mean: [f64; 2], cov: [[f64; 2]; 2]) -> Self {
        GaussianTransition { mean, cov }
    }

    pub fn var(&self, c: Component) -> f64 {
        self.cov[c.index()][c.index()]
    }

    pub fn sd(&self, c: Component) -> f64 {
        self.var(c).sqrt()
    }

    pub fn det(&self) -> f64 {
        self.cov[0][0] * self.cov[1][1] - self.cov[0][1] * self.cov[1][0]
    }

    pub fn correlation(&self) -> f64 {
        self.cov[0][1] / (self.cov[0][0] * self.cov[1][1]).sqrt()
    }

    /// Lower Cholesky factor `[[l11, 0], [l21, l22]]`; fails unless strictly
    /// positive-definite.
    pub fn cholesky(&self) -> Result<[[f64; 2]; 2]> {
        let det = self.det();
        if !(self.cov[0][0] > 0.0 && det > 0.0 && det.is_finite()) {
            return Err(Error::SingularCovariance { det });
        }
        let l11 = self.cov[0][0].sqrt();
        let l21 = self.cov[1][0] / l11;
        let l22 = (self.cov[1][1] - l21 * l21).sqrt();
        if !(l22 > 0.0) {
            return Err(Error::SingularCovariance { det });
        }
        Ok([[l11, 0.0], [l21, l22]])
    }

    /// Mean and standard deviation of coordinate `c` given the other one
    /// equals `other_value`.
    pub fn conditional(&self, c: Component, other_value: f64) -> (f64, f64) {
        let (i, j) = (c.index(), c.other().index());
        let beta = self.cov[i][j] / self.cov[j][j];
        let mean = self.mean[i] + beta * (other_value - self.mean[j]);
        let var = self.cov[i][i] - beta * self.cov[i][j];
        (mean, var.max(0.0).sqrt())
    }
}

/// Free transition law of the correlated Wiener process over `dt`.
pub fn wiener_transition(p: &WienerParams, y: [f64; 2], dt: f64) -> Result<GaussianTransition> {
    check_dt(dt)?;
    let c = p.covariance_rate();
    Ok(GaussianTransition::new(
        [y[0] + p.mu1 * dt, y[1] + p.mu2 * dt],
        [[c[0][0] * dt, c[0][1] * dt], [c[1][0] * dt, c[1][1] * dt]],
    ))
}

/// Free transition law of the Ornstein-Uhlenbeck process over `dt`.
pub fn ou_transition(p: &OuParams, y: [f64; 2], dt: f64) -> Result<GaussianTransition> {
    check_dt(dt)?;
    let a = (-dt / p.theta).exp();
    let mean = |c: Component| {
        let m = p.asymptote(c);
        m + (y[c.index()] - m) * a
    };
    let scale = 0.5 * p.theta * -(-2.0 * dt / p.theta).exp_m1();
    let c = p.covariance_rate();
    Ok(GaussianTransition::new(
        [mean(Component::One), mean(Component::Two)],
        [
            [c[0][0] * scale, c[0][1] * scale],
            [c[1][0] * scale, c[1][1] * scale],
        ],
    ))
}

/// A supported bivariate diffusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Wiener(WienerParams),
    Ou(OuParams),
}

impl Model {
    pub fn start(&self) -> [f64; 2] {
        match self {
            Model::Wiener(p) => [p.x01, p.x02],
            Model::Ou(p) => [p.x01, p.x02],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Model::Wiener(p) => WienerParams::try_from(WienerSpec::from(*p)).map(|_| ()),
            Model::Ou(p) => p.validate(),
        }
    }

    /// Law of `X(s + dt)` given `X(s) = y`.
    pub fn transition(&self, y: [f64; 2], dt: f64) -> Result<GaussianTransition> {
        match self {
            Model::Wiener(p) => wiener_transition(p, y, dt),
            Model::Ou(p) => ou_transition(p, y, dt),
        }
    }

    /// Marginal law of coordinate `c` over `dt` from `y_c`: `(mean, variance)`.
    pub fn marginal_transition(&self, c: Component, y: f64, dt: f64) -> Result<(f64, f64)> {
        check_dt(dt)?;
        let i = c.index();
        match self {
            Model::Wiener(p) => Ok((y + p.mu(c) * dt, p.covariance_rate()[i][i] * dt)),
            Model::Ou(p) => {
                let a = (-dt / p.theta).exp();
                let m = p.asymptote(c);
                let scale = 0.5 * p.theta * -(-2.0 * dt / p.theta).exp_m1();
                Ok((m + (y - m) * a, p.covariance_rate()[i][i] * scale))
            }
        }
    }

    pub fn drift(&self, y: [f64; 2]) -> [f64; 2] {
        match self {
            Model::Wiener(p) => [p.mu1, p.mu2],
            Model::Ou(p) => [p.mu1 - y[0] / p.theta, p.mu2 - y[1] / p.theta],
        }
    }

    pub fn covariance_rate(&self) -> [[f64; 2]; 2] {
        match self {
            Model::Wiener(p) => p.covariance_rate(),
            Model::Ou(p) => p.covariance_rate(),
        }
    }

    /// Typical spread of coordinate `c` over a horizon: `sigma_c sqrt(horizon)`,
    /// capped for OU by the stationary standard deviation.
    pub fn spread(&self, c: Component, horizon: f64) -> f64 {
        let i = c.index();
        let rate = self.covariance_rate()[i][i];
        let free = (rate * horizon).sqrt();
        match self {
            Model::Wiener(_) => free,
            Model::Ou(p) => free.min((0.5 * p.theta * rate).sqrt()),
        }
    }

    pub fn as_wiener(&self) -> Option<&WienerParams> {
        match self {
            Model::Wiener(p) => Some(p),
            Model::Ou(_) => None,
        }
    }
}

/// Law of one Euler-Maruyama increment from `y` with step `h`.
pub fn em_step_distribution(model: &Model, y: [f64; 2], h: f64) -> Result<GaussianTransition> {
    check_dt(h)?;
    let d = model.drift(y);
    let c = model.covariance_rate();
    Ok(GaussianTransition::new(
        [y[0] + d[0] * h, y[1] + d[1] * h],
        [[c[0][0] * h, c[0][1] * h], [c[1][0] * h, c[1][1] * h]],
    ))
}

/// Raw grid fields as written in config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpecInput {
    pub h: f64,
    #[serde(rename = "Theta", alias = "theta")]
    pub horizon: f64,
    pub r1: f64,
    pub r2: f64,
    #[serde(default)]
    pub m1: Option<usize>,
    #[serde(default)]
    pub m2: Option<usize>,
}

/// Time/space lattice of the integral-equation solver. Knots are
/// `t_k = k h` for `k = 0..=n` and `y_u = B_i - u r_i` for `u = 0..=m_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub h: f64,
    pub horizon: f64,
    pub r1: f64,
    pub r2: f64,
    pub m1: usize,
    pub m2: usize,
    n: usize,
}

/// Number of standard deviations the default spatial truncation covers.
pub const DEFAULT_TRUNCATION_SDS: f64 = 8.0;

impl GridSpec {
    pub fn new(h: f64, horizon: f64, r1: f64, r2: f64, m1: usize, m2: usize) -> Result<Self> {
        check_positive("h", h)?;
        check_positive("Theta", horizon)?;
        check_positive("r1", r1)?;
        check_positive("r2", r2)?;
        let steps = horizon / h;
        let n = steps.round();
        if n < 1.0 || (steps - n).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::param(
                "h",
                format!("Theta / h = {steps} must be a positive integer"),
            ));
        }
        if m1 < 1 || m2 < 1 {
            return Err(Error::param("m", "truncation counts must be at least 1"));
        }
        Ok(GridSpec {
            h,
            horizon,
            r1,
            r2,
            m1,
            m2,
            n: n as usize,
        })
    }

    /// Grid whose spatial truncation `m_i r_i` covers
    /// [`DEFAULT_TRUNCATION_SDS`] spreads of each coordinate over the horizon.
    pub fn with_default_truncation(
        h: f64,
        horizon: f64,
        r1: f64,
        r2: f64,
        model: &Model,
    ) -> Result<Self> {
        check_positive("Theta", horizon)?;
        let m = |c: Component, r: f64| {
            ((DEFAULT_TRUNCATION_SDS * model.spread(c, horizon) / r).ceil() as usize).max(1)
        };
        GridSpec::new(
            h,
            horizon,
            r1,
            r2,
            m(Component::One, r1),
            m(Component::Two, r2),
        )
    }

    pub fn from_input(input: &GridSpecInput, model: &Model) -> Result<Self> {
        match (input.m1, input.m2) {
            (Some(m1), Some(m2)) => {
                GridSpec::new(input.h, input.horizon, input.r1, input.r2, m1, m2)
            }
            (None, None) => GridSpec::with_default_truncation(
                input.h,
                input.horizon,
                input.r1,
                input.r2,
                model,
            ),
            _ => Err(Error::param("m", "give both m1 and m2 or neither")),
        }
    }

    /// Number of time steps `N = Theta / h`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self, c: Component) -> f64 {
        match c {
            Component::One => self.r1,
            Component::Two => self.r2,
        }
    }

    pub fn m(&self, c: Component) -> usize {
        match c {
            Component::One => self.m1,
            Component::Two => self.m2,
        }
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.h
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n).map(|k| self.time(k)).collect()
    }

    /// Spatial knots of slice `c`, descending from the level.
    pub fn knots(&self, c: Component, level: f64) -> Vec<f64> {
        let r = self.r(c);
        (0..=self.m(c)).map(|u| level - u as f64 * r).collect()
    }

    /// Index `k` with `t_k = t`, if `t` is a knot time.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        let k = (t / self.h).round();
        if k >= 0.0 && (k * self.h - t).abs() <= 1e-9 * self.h && k as usize <= self.n {
            Some(k as usize)
        } else {
            None
        }
    }
}

/// Free-form provenance attached to a [`DensityField`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub label: String,
    pub axis1_name: String,
    pub axis2_name: String,
    #[serde(default)]
    pub notes: Vec<String>,
}

/// Values on a tensor grid, stored row-major (`axis1` outer). `NaN` marks a
/// cell with no defined value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
    pub values: Vec<f64>,
    pub meta: FieldMeta,
}

fn strictly_monotone(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0]) || v.windows(2).all(|w| w[1] < w[0])
}

impl DensityField {
    pub fn new(axis1: Vec<f64>, axis2: Vec<f64>, values: Vec<f64>, meta: FieldMeta) -> Result<Self> {
        if values.len() != axis1.len() * axis2.len() {
            return Err(Error::Numerical(format!(
                "field has {} values for a {}x{} grid",
                values.len(),
                axis1.len(),
                axis2.len()
            )));
        }
        if !strictly_monotone(&axis1) || !strictly_monotone(&axis2) {
            return Err(Error::Numerical("field axes must be strictly monotone".into()));
        }
        Ok(DensityField {
            axis1,
            axis2,
            values,
            meta,
        })
    }

    pub fn zeros(axis1: Vec<f64>, axis2: Vec<f64>, meta: FieldMeta) -> Result<Self> {
        let n = axis1.len() * axis2.len();
        DensityField::new(axis1, axis2, vec![0.0; n], meta)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.axis1.len(), self.axis2.len())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.axis2.len() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let n2 = self.axis2.len();
        self.values[i * n2 + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n2 = self.axis2.len();
        &self.values[i * n2..(i + 1) * n2]
    }

    /// Sum of finite values times a constant cell area.
    pub fn mass(&self, cell_area: f64) -> f64 {
        self.values.iter().filter(|v| v.is_finite()).sum::<f64>() * cell_area
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn wiener(mu: [f64; 2], rho: f64) -> WienerParams {
        WienerParams::new(mu, [1.0, 1.0], rho, [0.0, 0.0]).unwrap()
    }

    #[test]
    fn wiener_constants() {
        let p = wiener([0.3, -0.2], 0.0);
        assert_relative_eq!(p.alpha, std::f64::consts::FRAC_PI_2, epsilon = 1e-15);
        assert_relative_eq!(p.k1, 0.3, epsilon = 1e-15);
        assert_relative_eq!(p.k2, -0.2, epsilon = 1e-15);
        for rho in [-0.9, -0.3, 0.2, 0.7] {
            let p = WienerParams::new([1.0, 2.0], [0.5, 2.0], rho, [0.0, 0.0]).unwrap();
            assert!(p.alpha > 0.0 && p.alpha < std::f64::consts::PI);
            assert!((p.alpha.cos() + rho).abs() < 1e-12);
            assert!((p.alpha.sin() - (1.0 - rho * rho).sqrt()).abs() < 1e-12);
            assert!(p.k3 > 0.0);
        }
    }

    #[test]
    fn wiener_rejects_bad_params() {
        assert!(WienerParams::new([0.0; 2], [1.0, 0.0], 0.0, [0.0; 2]).is_err());
        assert!(WienerParams::new([0.0; 2], [1.0, 1.0], 1.0, [0.0; 2]).is_err());
        assert!(WienerParams::new([f64::NAN, 0.0], [1.0, 1.0], 0.0, [0.0; 2]).is_err());
    }

    #[test]
    fn wiener_transition_examples() {
        let t = wiener_transition(&wiener([0.0, 0.0], 0.0), [0.0, 0.0], 1.0).unwrap();
        assert_eq!(t.mean, [0.0, 0.0]);
        assert_eq!(t.cov, [[1.0, 0.0], [0.0, 1.0]]);

        let t = wiener_transition(&wiener([1.0, 1.5], 0.5), [0.0, 0.0], 2.0).unwrap();
        assert_eq!(t.mean, [2.0, 3.0]);
        assert_eq!(t.cov, [[2.0, 1.0], [1.0, 2.0]]);

        let t = wiener_transition(&wiener([1.0, 1.5], 0.5), [0.3, 0.4], 1e-14).unwrap();
        assert!(t.cov[0][0] < 1e-13 && (t.mean[0] - 0.3).abs() < 1e-13);

        assert!(wiener_transition(&wiener([0.0; 2], 0.0), [0.0; 2], 0.0).is_err());
        assert!(wiener_transition(&wiener([0.0; 2], 0.0), [0.0; 2], -1.0).is_err());
    }

    #[test]
    fn wiener_transition_linear_in_dt() {
        let p = WienerParams::new([0.7, -1.1], [1.3, 0.4], -0.35, [0.0; 2]).unwrap();
        let a = wiener_transition(&p, [0.0; 2], 0.37).unwrap();
        let b = wiener_transition(&p, [0.0; 2], 0.74).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(b.cov[i][j], 2.0 * a.cov[i][j]);
            }
        }
    }

    #[test]
    fn ou_transition_examples() {
        let p = OuParams::new([1.5, 1.5], 10.0, [[2.0, 1.0], [1.0, 2.0]], [15.0, 15.0]).unwrap();
        let t = ou_transition(&p, [15.0, 15.0], 3.7).unwrap();
        assert_relative_eq!(t.mean[0], 15.0, epsilon = 1e-12);
        assert_relative_eq!(t.mean[1], 15.0, epsilon = 1e-12);

        let t = ou_transition(&p, [0.0, 0.0], 1e4).unwrap();
        assert_relative_eq!(t.mean[0], 15.0, epsilon = 1e-9);
        assert_relative_eq!(t.cov[0][0], 25.0, epsilon = 1e-9);
        assert_relative_eq!(t.cov[0][1], 20.0, epsilon = 1e-9);
    }

    #[test]
    fn em_step_examples() {
        let w = wiener([1.0, 1.5], 0.5);
        let m = Model::Wiener(w);
        let a = em_step_distribution(&m, [0.2, 0.1], 0.01).unwrap();
        let b = wiener_transition(&w, [0.2, 0.1], 0.01).unwrap();
        assert_eq!(a, b);

        let ou = Model::Ou(OuParams::new([1.0, 1.0], 1.0, [[1.0, 0.0], [0.0, 1.0]], [0.0; 2]).unwrap());
        let s = em_step_distribution(&ou, [0.0, 0.0], 0.01).unwrap();
        assert_relative_eq!(s.mean[0], 0.01, epsilon = 1e-15);
        assert_relative_eq!(s.mean[1], 0.01, epsilon = 1e-15);
        let s2 = em_step_distribution(&ou, [5.0, -3.0], 0.01).unwrap();
        assert_eq!(s.cov, s2.cov);
        assert!(em_step_distribution(&ou, [0.0; 2], 0.0).is_err());
    }

    #[test]
    fn grid_validation() {
        let g = GridSpec::new(0.01, 3.0, 0.05, 0.05, 10, 10).unwrap();
        assert_eq!(g.n(), 300);
        assert_eq!(g.time_index(1.5), Some(150));
        assert_eq!(g.time_index(1.505), None);
        assert!(GridSpec::new(0.07, 1.0, 0.05, 0.05, 10, 10).is_err());
        assert!(GridSpec::new(0.01, 3.0, 0.05, 0.05, 0, 10).is_err());
        assert!(GridSpec::new(-0.01, 3.0, 0.05, 0.05, 1, 1).is_err());
        let k = g.knots(Component::One, 1.0);
        assert_eq!(k.len(), 11);
        assert_eq!(k[0], 1.0);
        assert!((k[10] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn default_truncation_covers_spread() {
        let m = Model::Wiener(wiener([0.0; 2], 0.5));
        let g = GridSpec::with_default_truncation(0.01, 3.0, 0.05, 0.05, &m).unwrap();
        assert!(g.m1 as f64 * g.r1 >= 8.0 * 3f64.sqrt());
        assert!((g.m1 - 1) as f64 * g.r1 < 8.0 * 3f64.sqrt());
    }

    #[test]
    fn density_field_shape_checks() {
        let meta = FieldMeta::default();
        assert!(DensityField::new(vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0; 3], meta.clone()).is_err());
        assert!(DensityField::new(vec![0.0, 0.0], vec![0.0, 1.0], vec![0.0; 4], meta.clone()).is_err());
        let f = DensityField::new(vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 2.0, 3.0, 4.0], meta).unwrap();
        assert_eq!(f.get(1, 0), 3.0);
    }
}
