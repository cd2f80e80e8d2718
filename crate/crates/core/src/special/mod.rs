//! Scalar special functions: modified Bessel `I_nu`, normal pdf/cdf and the
//! bivariate normal upper-orthant probability with its spatial derivatives.

mod bessel;
mod bvn;
mod normal;

pub use bessel::{bessel_i, bessel_i_scaled, log_bessel_i, BesselMethod};
pub use bvn::{bvn_cdf, bvn_survival, bvn_survival_dx, bvnu};
pub use normal::{
    log_normal_pdf, normal_cdf, normal_pdf, normal_sf, std_normal_cdf, std_normal_pdf,
    std_normal_sf,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Truncation policy shared by every infinite series in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesControl {
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        SeriesControl {
            rel_tol: 1e-12,
            max_terms: 500,
        }
    }
}

impl SeriesControl {
    pub fn new(rel_tol: f64, max_terms: usize) -> Result<Self> {
        let c = SeriesControl { rel_tol, max_terms };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol.is_finite() && self.rel_tol > 0.0) {
            return Err(Error::param("rel_tol", format!("must be positive, got {}", self.rel_tol)));
        }
        if self.max_terms < 10 {
            return Err(Error::param(
                "max_terms",
                format!("must be at least 10, got {}", self.max_terms),
            ));
        }
        Ok(())
    }
}

/// `sin(pi x)` with exact zeros at the integers.
pub(crate) fn sin_pi(x: f64) -> f64 {
    let r = x - 2.0 * (0.5 * x).round();
    if r == 0.0 || r.abs() == 1.0 {
        0.0
    } else {
        (std::f64::consts::PI * r).sin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sin_pi_exact_zeros() {
        for n in -5..=5 {
            assert_eq!(sin_pi(n as f64), 0.0);
        }
        assert!((sin_pi(0.5) - 1.0).abs() < 1e-15);
        assert!((sin_pi(2.25) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((sin_pi(-0.5) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn control_validation() {
        assert!(SeriesControl::new(0.0, 100).is_err());
        assert!(SeriesControl::new(1e-10, 9).is_err());
        assert!(SeriesControl::new(1e-10, 10).is_ok());
    }
}
