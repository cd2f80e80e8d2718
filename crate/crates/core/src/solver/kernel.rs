use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Boundary, Component, GridSpec, Model};
use crate::special::bvn_survival_dx;

/// Point of boundary slice `c` with free coordinate `y`: the slice of
/// component 1 is `x2 = B2` (where `T2` happens), that of component 2 is
/// `x1 = B1`.
pub fn slice_point(c: Component, y: f64, b: &Boundary) -> [f64; 2] {
    match c {
        Component::One => [y, b.b2],
        Component::Two => [b.b1, y],
    }
}

/// `d/dx_i` of the free survival `P(X1(t) > x1, X2(t) > x2)` from the start,
/// evaluated at the point of slice `i` with free coordinate `y`.
pub fn lhs_derivative(i: Component, y: f64, t: f64, model: &Model, b: &Boundary) -> Result<f64> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    let tr = model.transition(model.start(), t)?;
    bvn_survival_dx(i, slice_point(i, y, b), &tr)
}

fn survival_dx_from(
    i: Component,
    y: f64,
    source: (Component, f64),
    dt: f64,
    model: &Model,
    b: &Boundary,
) -> Result<f64> {
    let tr = model.transition(slice_point(source.0, source.1, b), dt)?;
    bvn_survival_dx(i, slice_point(i, y, b), &tr)
}

/// Lagged kernel: `d/dx_i [Fbar(target, lag h | source) - Fbar(target, (lag - 1) h | source)]`.
/// At `lag = 1` the second survival is the degenerate zero-elapsed value,
/// whose derivative away from the source vanishes.
pub fn kernel(
    i: Component,
    lag: usize,
    target_y: f64,
    source: (Component, f64),
    model: &Model,
    b: &Boundary,
    grid: &GridSpec,
) -> Result<f64> {
    if lag < 1 {
        return Err(Error::Domain("kernel lag must be at least 1".into()));
    }
    let h = grid.h;
    let now = survival_dx_from(i, target_y, source, lag as f64 * h, model, b)?;
    let before = if lag == 1 {
        0.0
    } else {
        survival_dx_from(i, target_y, source, (lag - 1) as f64 * h, model, b)?
    };
    Ok(now - before)
}

/// Survival derivatives `D_ij(lag)[u][v] = -d/dx_i Fbar(slice_i(y_u), lag h | slice_j(y_v))`
/// for every lag the recursion needs. Constant-coefficient models are time
/// homogeneous, so one block per lag serves every pair `(k, rho)` with
/// `k - rho = lag`.
#[derive(Debug, Clone)]
pub struct KernelCache {
    n_lags: usize,
    m: [usize; 2],
    stride: usize,
    data: Vec<f64>,
}

impl KernelCache {
    /// Blocks for lags `1..=n_lags`.
    pub fn build(model: &Model, b: &Boundary, grid: &GridSpec, n_lags: usize) -> Result<Self> {
        let knots = [grid.knots(Component::One, b.b1), grid.knots(Component::Two, b.b2)];
        let m = [knots[0].len(), knots[1].len()];
        let stride = (m[0] + m[1]) * (m[0] + m[1]);
        let mut data = vec![0.0; stride * n_lags];
        data.par_chunks_mut(stride.max(1))
            .enumerate()
            .try_for_each(|(l, chunk)| -> Result<()> {
                let dt = (l + 1) as f64 * grid.h;
                let mut off = 0;
                for i in Component::BOTH {
                    for j in Component::BOTH {
                        let (mi, mj) = (m[i.index()], m[j.index()]);
                        let block = &mut chunk[off..off + mi * mj];
                        for (v, &yv) in knots[j.index()].iter().enumerate() {
                            let tr = model.transition(slice_point(j, yv, b), dt)?;
                            for (u, &yu) in knots[i.index()].iter().enumerate() {
                                block[u * mj + v] = -bvn_survival_dx(i, slice_point(i, yu, b), &tr)?;
                            }
                        }
                        off += mi * mj;
                    }
                }
                Ok(())
            })?;
        Ok(KernelCache {
            n_lags,
            m,
            stride,
            data,
        })
    }

    /// Memory the cache of a solve on `grid` occupies.
    pub fn bytes_for(grid: &GridSpec) -> usize {
        let m = grid.m1 + grid.m2 + 2;
        m * m * grid.n().saturating_sub(1) * std::mem::size_of::<f64>()
    }

    pub fn n_lags(&self) -> usize {
        self.n_lags
    }

    pub fn knots(&self, c: Component) -> usize {
        self.m[c.index()]
    }

    /// Row-major block `D_ij(lag)` with `knots(i)` rows and `knots(j)` columns.
    pub fn block(&self, i: Component, j: Component, lag: usize) -> &[f64] {
        assert!(lag >= 1 && lag <= self.n_lags, "lag {lag} outside the cache");
        let [m1, m2] = self.m;
        let (off, len) = match (i, j) {
            (Component::One, Component::One) => (0, m1 * m1),
            (Component::One, Component::Two) => (m1 * m1, m1 * m2),
            (Component::Two, Component::One) => (m1 * m1 + m1 * m2, m2 * m1),
            (Component::Two, Component::Two) => (m1 * m1 + 2 * m1 * m2, m2 * m2),
        };
        let start = (lag - 1) * self.stride + off;
        &self.data[start..start + len]
    }

    /// Row `u` of `D_ij(lag)`.
    pub fn row(&self, i: Component, j: Component, lag: usize, u: usize) -> &[f64] {
        let mj = self.m[j.index()];
        &self.block(i, j, lag)[u * mj..(u + 1) * mj]
    }

    /// The lagged kernel of [`kernel`] reconstructed from cached blocks.
    pub fn kernel(&self, i: Component, j: Component, lag: usize, u: usize, v: usize) -> f64 {
        let mj = self.m[j.index()];
        let now = -self.block(i, j, lag)[u * mj + v];
        let before = if lag == 1 {
            0.0
        } else {
            -self.block(i, j, lag - 1)[u * mj + v]
        };
        now - before
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::WienerParams;

    fn setup() -> (Model, Boundary, GridSpec) {
        let p = WienerParams::new([0.2, -0.1], [1.0, 0.8], 0.5, [0.0, 0.0]).unwrap();
        let grid = GridSpec::new(0.1, 1.0, 0.2, 0.25, 12, 10).unwrap();
        (Model::Wiener(p), Boundary::absorbing(1.0, 1.2), grid)
    }

    #[test]
    fn cache_matches_direct_kernel() {
        let (model, b, grid) = setup();
        let cache = KernelCache::build(&model, &b, &grid, 9).unwrap();
        let k1 = grid.knots(Component::One, b.b1);
        let k2 = grid.knots(Component::Two, b.b2);
        for lag in [1, 2, 5, 9] {
            for (u, v) in [(0, 0), (3, 7), (12, 10), (5, 1)] {
                let direct =
                    kernel(Component::One, lag, k1[u], (Component::Two, k2[v]), &model, &b, &grid).unwrap();
                let cached = cache.kernel(Component::One, Component::Two, lag, u, v);
                assert!((direct - cached).abs() < 1e-15);
                let v1 = v.min(12);
                let direct =
                    kernel(Component::Two, lag, k2[u.min(10)], (Component::One, k1[v1]), &model, &b, &grid).unwrap();
                let cached = cache.kernel(Component::Two, Component::One, lag, u.min(10), v1);
                assert!((direct - cached).abs() < 1e-15);
            }
        }
        assert!(kernel(Component::One, 0, 0.0, (Component::One, 0.0), &model, &b, &grid).is_err());
    }

    #[test]
    fn lhs_derivative_vanishes_at_short_times_and_mirrors() {
        let (model, b, _) = setup();
        let v = lhs_derivative(Component::One, -0.5, 1e-4, &model, &b).unwrap();
        assert!(v.abs() < 1e-300);
        assert!(lhs_derivative(Component::One, -0.5, 1.0, &model, &b).unwrap() < 0.0);
        let sym = Model::Wiener(WienerParams::new([0.1, 0.1], [1.0, 1.0], 0.4, [0.0, 0.0]).unwrap());
        let bs = Boundary::absorbing(1.0, 1.0);
        for y in [-1.0, 0.3, 0.9] {
            let a = lhs_derivative(Component::One, y, 0.7, &sym, &bs).unwrap();
            let c = lhs_derivative(Component::Two, y, 0.7, &sym, &bs).unwrap();
            assert!((a - c).abs() < 1e-15);
        }
    }

    #[test]
    fn symmetric_kernels_exchange() {
        let sym = Model::Wiener(WienerParams::new([0.1, 0.1], [1.0, 1.0], 0.4, [0.0, 0.0]).unwrap());
        let bs = Boundary::absorbing(1.0, 1.0);
        let grid = GridSpec::new(0.1, 1.0, 0.2, 0.2, 8, 8).unwrap();
        let cache = KernelCache::build(&sym, &bs, &grid, 5).unwrap();
        for lag in 1..=5 {
            for u in 0..=8 {
                for v in 0..=8 {
                    let a = cache.kernel(Component::One, Component::Two, lag, u, v);
                    let c = cache.kernel(Component::Two, Component::One, lag, u, v);
                    assert!((a - c).abs() < 1e-10);
                    let a = cache.kernel(Component::One, Component::One, lag, u, v);
                    let c = cache.kernel(Component::Two, Component::Two, lag, u, v);
                    assert!((a - c).abs() < 1e-10);
                }
            }
        }
    }
}
