//! Ambiguity-set radii from the Gaussian and empirical concentration bounds.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConcentrationConfig {
    pub n_low: usize,
    pub n_high: usize,
    pub eta_low: f64,
    pub eta_high: f64,
    pub c_low: f64,
    pub c_high: f64,
    pub c1_low: f64,
    pub c1_high: f64,
    pub c2_low: f64,
    pub c2_high: f64,
    pub alpha_low: f64,
    pub alpha_high: f64,
    pub dim_low: usize,
    pub dim_high: usize,
}

impl Default for ConcentrationConfig {
    fn default() -> Self {
        let eta = eta_from_delta(0.05);
        Self {
            n_low: 8000,
            n_high: 8000,
            eta_low: eta,
            eta_high: eta,
            c_low: E,
            c_high: E,
            c1_low: E,
            c1_high: E,
            c2_low: 1.0,
            c2_high: 1.0,
            alpha_low: 2.0,
            alpha_high: 2.0,
            dim_low: 3,
            dim_high: 2,
        }
    }
}

/// Uniform split of a global failure probability across the two levels, so
/// that `(1 − η)² = 1 − δ`.
pub fn eta_from_delta(delta: f64) -> f64 {
    1.0 - (1.0 - delta).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Radii {
    pub eps_low: f64,
    pub eps_high: f64,
    pub eps_joint: f64,
}

impl Radii {
    fn from_levels(eps_low: f64, eps_high: f64) -> Self {
        Self {
            eps_low,
            eps_high,
            eps_joint: eps_low.hypot(eps_high),
        }
    }
}

struct Level<'a> {
    name: &'a str,
    n: usize,
    eta: f64,
    c: f64,
    c1: f64,
    c2: f64,
    alpha: f64,
    dim: usize,
}

impl ConcentrationConfig {
    fn levels(&self) -> [Level<'static>; 2] {
        [
            Level {
                name: "low",
                n: self.n_low,
                eta: self.eta_low,
                c: self.c_low,
                c1: self.c1_low,
                c2: self.c2_low,
                alpha: self.alpha_low,
                dim: self.dim_low,
            },
            Level {
                name: "high",
                n: self.n_high,
                eta: self.eta_high,
                c: self.c_high,
                c1: self.c1_high,
                c2: self.c2_high,
                alpha: self.alpha_high,
                dim: self.dim_high,
            },
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for lv in self.levels() {
            let f = |field: &str| format!("{field}_{}", lv.name);
            if lv.n == 0 {
                return Err(config_err(&f("n"), "sample count must be >= 1"));
            }
            if !(lv.eta > 0.0 && lv.eta <= 1.0) {
                return Err(config_err(&f("eta"), "confidence level must lie in (0, 1]"));
            }
            for (field, v) in [("c", lv.c), ("c1", lv.c1), ("c2", lv.c2), ("alpha", lv.alpha)] {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(config_err(&f(field), "constant must be positive and finite"));
                }
            }
            if lv.dim == 0 {
                return Err(config_err(&f("dim"), "dimension must be >= 1"));
            }
        }
        Ok(())
    }

    /// Global confidence `δ = 1 − (1 − ηℓ)(1 − ηh)`.
    pub fn delta(&self) -> f64 {
        1.0 - (1.0 - self.eta_low) * (1.0 - self.eta_high)
    }
}

fn log_ratio(c: f64, eta: f64, field: &str) -> Result<f64> {
    let l = (c / eta).ln();
    if l <= 0.0 {
        return Err(Error::RadiusUndefined {
            field: field.to_string(),
        });
    }
    Ok(l)
}

fn gaussian_level(lv: &Level) -> Result<f64> {
    Ok(log_ratio(lv.c, lv.eta, &format!("c_{}", lv.name))? / (lv.n as f64).sqrt())
}

fn empirical_level(lv: &Level) -> Result<f64> {
    let l = log_ratio(lv.c1, lv.eta, &format!("c1_{}", lv.name))?;
    let threshold = l / lv.c2;
    let n = lv.n as f64;
    let exponent = if n >= threshold {
        (1.0 / lv.dim as f64).min(0.5)
    } else {
        1.0 / lv.alpha
    };
    Ok((l / (lv.c2 * n)).powf(exponent))
}

pub fn gaussian_radii(cfg: &ConcentrationConfig) -> Result<Radii> {
    cfg.validate()?;
    let [lo, hi] = cfg.levels();
    Ok(Radii::from_levels(gaussian_level(&lo)?, gaussian_level(&hi)?))
}

pub fn empirical_radii(cfg: &ConcentrationConfig) -> Result<Radii> {
    cfg.validate()?;
    let [lo, hi] = cfg.levels();
    Ok(Radii::from_levels(empirical_level(&lo)?, empirical_level(&hi)?))
}
