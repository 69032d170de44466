//! Additive contamination of endogenous test data.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::linalg::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    /// Rescaled so the standard deviation is `sigma`.
    StudentT { df: f64 },
    /// `sigma · (E − 1/rate)` with `E ~ Exp(rate)`.
    Exponential { rate: f64 },
}

impl NoiseKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseKind::Gaussian => Ok(()),
            NoiseKind::StudentT { df } if !(df > 2.0 && df.is_finite()) => {
                Err(config_err("df", "student-t contamination needs df > 2"))
            }
            NoiseKind::Exponential { rate } if !(rate > 0.0 && rate.is_finite()) => {
                Err(config_err("rate", "exponential contamination needs rate > 0"))
            }
            _ => Ok(()),
        }
    }

    /// Tag used in result files.
    pub fn label(&self) -> String {
        match self {
            NoiseKind::Gaussian => "gaussian".into(),
            NoiseKind::StudentT { df } => format!("student_t{df}"),
            NoiseKind::Exponential { rate } => format!("exponential{rate}"),
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContaminationSpec {
    pub alpha: f64,
    pub sigma: f64,
    pub noise: NoiseKind,
    pub seed: u64,
}

impl ContaminationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(config_err("alpha", "must lie in [0, 1]"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(config_err("sigma", "must be finite and >= 0"));
        }
        self.noise.validate()
    }
}

/// Returns `x + α·N`, the mixture `(1−α)·x + α·(x + N)`, where the rows of
/// `N` are i.i.d. zero-mean draws scaled by `sigma`.
pub fn contaminate(x: &Mat, spec: &ContaminationSpec) -> Result<Mat> {
    spec.validate()?;
    if spec.alpha == 0.0 || spec.sigma == 0.0 {
        return Ok(x.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, d) = x.shape();
    let noise = match spec.noise {
        NoiseKind::Gaussian => Mat::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng)),
        NoiseKind::StudentT { df } => {
            let dist = StudentT::new(df).expect("validated df");
            let scale = ((df - 2.0) / df).sqrt();
            Mat::from_fn(n, d, |_, _| dist.sample(&mut rng) * scale)
        }
        NoiseKind::Exponential { rate } => {
            let dist = Exp::new(rate).expect("validated rate");
            Mat::from_fn(n, d, |_, _| dist.sample(&mut rng) - 1.0 / rate)
        }
    };
    Ok(x + noise * (spec.alpha * spec.sigma))
}
