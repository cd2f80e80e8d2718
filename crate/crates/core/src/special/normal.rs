use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Upper tail `1 - Phi(z)`, accurate far into the tail.
pub fn std_normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

fn check_sd(sd: f64) -> Result<()> {
    if sd.is_finite() && sd > 0.0 {
        Ok(())
    } else {
        Err(Error::param("sd", format!("must be positive, got {sd}")))
    }
}

pub fn normal_pdf(x: f64, mean: f64, sd: f64) -> Result<f64> {
    check_sd(sd)?;
    Ok(std_normal_pdf((x - mean) / sd) / sd)
}

pub fn log_normal_pdf(x: f64, mean: f64, sd: f64) -> Result<f64> {
    check_sd(sd)?;
    let z = (x - mean) / sd;
    Ok(-0.5 * z * z - LN_SQRT_2PI - sd.ln())
}

pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> Result<f64> {
    check_sd(sd)?;
    Ok(std_normal_cdf((x - mean) / sd))
}

pub fn normal_sf(x: f64, mean: f64, sd: f64) -> Result<f64> {
    check_sd(sd)?;
    Ok(std_normal_sf((x - mean) / sd))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_values() {
        assert!((normal_pdf(0.0, 0.0, 1.0).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert_eq!(normal_cdf(0.0, 0.0, 1.0).unwrap(), 0.5);
        assert!(normal_pdf(0.0, 0.0, 0.0).is_err());
        assert!(normal_cdf(0.0, 0.0, -1.0).is_err());
        let lp = log_normal_pdf(1.3, 0.2, 0.7).unwrap();
        assert!((lp.exp() - normal_pdf(1.3, 0.2, 0.7).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn cdf_matches_quadrature_oracle() {
        // mpmath.quad of the standard pdf over (-inf, 1.96]
        assert!((normal_cdf(1.96, 0.0, 1.0).unwrap() - 0.975_002_104_851_779_6).abs() < 1e-12);
        // and far in the tail
        assert!((std_normal_sf(8.0) / 6.220_960_574_271_784e-16 - 1.0).abs() < 1e-12);
        assert!((std_normal_cdf(-3.0) - 1.349_898_031_630_094_6e-3).abs() < 1e-15);
    }

    #[test]
    fn sf_plus_cdf_is_one() {
        for i in -40..=40 {
            let z = i as f64 * 0.2;
            assert!((std_normal_cdf(z) + std_normal_sf(z) - 1.0).abs() < 1e-15);
        }
    }
}
