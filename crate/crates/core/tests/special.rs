use fpt2d::model::{Component, GaussianTransition};
use fpt2d::special::{
    bessel_i, bessel_i_scaled, bvn_cdf, bvn_survival, bvn_survival_dx, bvnu, log_bessel_i,
    normal_cdf, SeriesControl,
};
use proptest::prelude::*;

// Reference values from tests/oracles/special_oracles.py (mpmath, 50 digits).
const LOG_I: [(f64, f64, f64); 12] = [
    (0.0, 0.1, 0.002_498_439_233_876_243_7),
    (1.5, 10.0, 7.824_408_407_159_665_9),
    (3.0, 50.0, 47.036_684_029_665_489),
    (0.5, 100.0, 96.778_476_373_801_282),
    (25.0, 40.0, 29.571_897_603_810_827),
    (60.0, 500.0, 492.374_727_120_694_33),
    (150.0, 100.0, -2.453_214_324_767_012_1),
    (7.5, 31.0, 27.450_539_216_958_466),
    (12.0, 30.5, 25.507_666_954_172_912),
    (100.0, 10000.0, 9993.975_882_946_515_5),
    (2.25, 0.004, -14.918_668_921_789_604),
    (400.0, 900.0, 808.129_397_760_050_47),
];

const BVNU: [(f64, f64, f64, f64); 9] = [
    (0.3, -0.7, 0.6, 0.357_292_151_039_880_72),
    (1.2, 0.4, -0.3, 0.019_924_028_943_990_639),
    (-0.5, -1.5, 0.95, 0.691_446_170_081_482_46),
    (0.8, 0.2, -0.97, 4.645_654_623_982_443e-7),
    (-2.0, 2.5, 0.999, 0.006_209_665_325_776_135_2),
    (1.0, 1.0, -0.999, 0.0),
    (2.5, 3.0, 0.0, 8.382_415_000_346_854_5e-6),
    (0.1, 0.15, 0.93, 0.390_328_103_974_062_35),
    (-1.0, 0.5, -0.93, 0.154_654_007_607_437_67),
];

fn ctl() -> SeriesControl {
    SeriesControl::default()
}

fn transition(mean: [f64; 2], s: [f64; 2], rho: f64) -> GaussianTransition {
    let c = rho * s[0] * s[1];
    GaussianTransition::new(mean, [[s[0] * s[0], c], [c, s[1] * s[1]]])
}

#[test]
fn bessel_matches_power_series_oracle() {
    let v = bessel_i(2.4, 3.7, &ctl()).unwrap();
    assert!((v - 3.660_479_251_539_610_6).abs() < 1e-10);
}

#[test]
fn bessel_matches_extended_precision_across_branches() {
    for &(nu, x, want) in &LOG_I {
        let got = log_bessel_i(nu, x, &ctl()).unwrap();
        assert!(
            (got - want).abs() < 1e-11 * want.abs().max(1.0),
            "nu={nu} x={x}: {got} vs {want}"
        );
    }
}

#[test]
fn bvnu_matches_quadrature_oracle() {
    for &(h, k, r, want) in &BVNU {
        let got = bvnu(h, k, r);
        assert!((got - want).abs() < 1e-10, "({h},{k},{r}): {got} vs {want}");
    }
    let t = transition([0.0, 0.0], [1.0, 1.0], 0.6);
    let v = bvn_survival([0.3, -0.7], &t).unwrap();
    assert!((v - 0.357_292_151_039_880_72).abs() < 1e-8);
}

proptest! {
    #[test]
    fn bessel_positive_and_increasing(nu in 0.0f64..60.0, x in 0.01f64..300.0, dx in 0.01f64..5.0) {
        let a = bessel_i_scaled(nu, x, &ctl()).unwrap();
        let b = bessel_i_scaled(nu, x + dx, &ctl()).unwrap();
        prop_assert!(a > 0.0);
        // I_nu(x + dx) / I_nu(x) = exp(dx) b / a must exceed one
        prop_assert!(dx + (b / a).ln() > 0.0);
    }

    #[test]
    fn bessel_recurrence(nu in 1.0f64..80.0, x in 0.05f64..2000.0) {
        let c = ctl();
        let lm = log_bessel_i(nu - 1.0, x, &c).unwrap();
        let l0 = log_bessel_i(nu, x, &c).unwrap();
        let lp = log_bessel_i(nu + 1.0, x, &c).unwrap();
        let lhs = (lm - l0).exp() - (lp - l0).exp();
        let rhs = 2.0 * nu / x;
        prop_assert!((lhs / rhs - 1.0).abs() < 1e-8, "lhs {} rhs {}", lhs, rhs);
    }

    #[test]
    fn survival_monotone(
        x1 in -3.0f64..3.0, x2 in -3.0f64..3.0, d in 0.001f64..1.0,
        rho in -0.995f64..0.995, s1 in 0.2f64..3.0, s2 in 0.2f64..3.0,
    ) {
        let t = transition([0.1, -0.2], [s1, s2], rho);
        let base = bvn_survival([x1, x2], &t).unwrap();
        prop_assert!(bvn_survival([x1 + d, x2], &t).unwrap() <= base + 1e-15);
        prop_assert!(bvn_survival([x1, x2 + d], &t).unwrap() <= base + 1e-15);
        prop_assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn inclusion_exclusion(
        x1 in -4.0f64..4.0, x2 in -4.0f64..4.0, rho in -0.999f64..0.999,
        s1 in 0.2f64..3.0, s2 in 0.2f64..3.0,
    ) {
        let m = [0.3, -0.4];
        let t = transition(m, [s1, s2], rho);
        let upper = bvn_survival([x1, x2], &t).unwrap();
        let lower = bvn_cdf([x1, x2], &t).unwrap();
        let f1 = normal_cdf(x1, m[0], s1).unwrap();
        let f2 = normal_cdf(x2, m[1], s2).unwrap();
        prop_assert!((upper - (1.0 - f1 - f2 + lower)).abs() < 1e-10);
    }

    #[test]
    fn derivative_matches_finite_difference(
        x1 in -3.0f64..3.0, x2 in -3.0f64..3.0, rho in -0.95f64..0.95,
        s1 in 0.5f64..2.0, s2 in 0.5f64..2.0, axis2 in proptest::bool::ANY,
    ) {
        let t = transition([0.0, 0.2], [s1, s2], rho);
        let axis = if axis2 { Component::Two } else { Component::One };
        let e = 1e-5;
        let mut lo = [x1, x2];
        let mut hi = [x1, x2];
        lo[axis.index()] -= e;
        hi[axis.index()] += e;
        let fd = (bvn_survival(hi, &t).unwrap() - bvn_survival(lo, &t).unwrap()) / (2.0 * e);
        let d = bvn_survival_dx(axis, [x1, x2], &t).unwrap();
        prop_assert!(d <= 0.0);
        prop_assert!((d - fd).abs() < 1e-6, "{} vs {}", d, fd);
    }
}

#[test]
fn derivative_example_rho_06() {
    let t = transition([0.0, 0.0], [1.0, 1.0], 0.6);
    let x = [0.4, -0.3];
    let e = 1e-5;
    let fd = (bvn_survival([x[0], x[1] + e], &t).unwrap()
        - bvn_survival([x[0], x[1] - e], &t).unwrap())
        / (2.0 * e);
    let d = bvn_survival_dx(Component::Two, x, &t).unwrap();
    assert!((d - fd).abs() < 1e-6);
}
