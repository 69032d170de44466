//! Exogenous environments: Gaussian moments or a matrix of samples.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_psd, mean_cov, psd_sqrt, repair_psd, symmetrize, Mat, Vector};
use crate::scm::Intervention;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianEnv {
    mean: Vector,
    cov: Mat,
}

impl GaussianEnv {
    /// Validates dimensions and positive semi-definiteness. Tiny negative
    /// eigenvalues are clamped to zero.
    pub fn new(mean: Vector, cov: Mat) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::Dimension(format!(
                "mean has length {}, covariance is {}x{}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        if mean.iter().any(|v| !v.is_finite()) || cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("non-finite Gaussian moments".into()));
        }
        let eig = check_psd(&cov)?;
        let cov = if eig.eigenvalues.iter().any(|&l| l < 0.0) {
            repair_psd(&cov)
        } else {
            symmetrize(&cov)
        };
        Ok(Self { mean, cov })
    }

    /// Independent coordinates with the given standard deviations.
    pub fn diagonal(mean: Vector, stds: &[f64]) -> Result<Self> {
        if stds.iter().any(|&s| s < 0.0 || !s.is_finite()) {
            return Err(Error::InvalidModel("standard deviations must be >= 0".into()));
        }
        let var = Vector::from_iterator(stds.len(), stds.iter().map(|s| s * s));
        Self::new(mean, Mat::from_diagonal(&var))
    }

    pub fn standard(d: usize) -> Self {
        Self {
            mean: Vector::zeros(d),
            cov: Mat::identity(d, d),
        }
    }

    /// Maximum-likelihood-style fit (unbiased covariance) to the rows of `x`.
    pub fn fit(x: &Mat) -> Result<Self> {
        let (mean, cov) = mean_cov(x)?;
        Self::new(mean, cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    pub fn cov(&self) -> &Mat {
        &self.cov
    }

    pub fn into_parts(self) -> (Vector, Mat) {
        (self.mean, self.cov)
    }

    /// Pins intervened coordinates: mean set to the value, variance and
    /// covariances zeroed.
    pub fn intervene(&self, iota: &Intervention) -> Result<Self> {
        iota.validate(self.dim())?;
        let mut out = self.clone();
        for (t, v) in iota.pairs() {
            out.mean[t] = v;
            out.cov.row_mut(t).fill(0.0);
            out.cov.column_mut(t).fill(0.0);
        }
        Ok(out)
    }

    /// Law of `A u` for `u` drawn from this environment.
    pub fn pushforward(&self, a: &Mat) -> Result<Self> {
        if a.ncols() != self.dim() {
            return Err(Error::Dimension(format!(
                "map has {} columns, environment dimension is {}",
                a.ncols(),
                self.dim()
            )));
        }
        Ok(Self {
            mean: a * &self.mean,
            cov: repair_psd(&(a * &self.cov * a.transpose())),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Mat> {
        let d = self.dim();
        let root = psd_sqrt(&self.cov)?;
        let z = Mat::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut x = z * root;
        for mut row in x.row_iter_mut() {
            row += self.mean.transpose();
        }
        Ok(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalEnv {
    samples: Mat,
}

impl EmpiricalEnv {
    pub fn new(samples: Mat) -> Result<Self> {
        if samples.nrows() == 0 {
            return Err(Error::Dimension("empirical environment needs at least one row".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("non-finite exogenous sample".into()));
        }
        Ok(Self { samples })
    }

    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.nrows()
    }

    pub fn samples(&self) -> &Mat {
        &self.samples
    }

    pub fn into_samples(self) -> Mat {
        self.samples
    }

    /// Overwrites intervened columns with their assigned values.
    pub fn intervene(&self, iota: &Intervention) -> Result<Self> {
        iota.validate(self.dim())?;
        let mut samples = self.samples.clone();
        for (t, v) in iota.pairs() {
            samples.column_mut(t).fill(v);
        }
        Ok(Self { samples })
    }

    /// Verbatim rows when `n` equals the stored count, otherwise a bootstrap
    /// resample.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Mat {
        let stored = self.n_samples();
        if n == stored {
            return self.samples.clone();
        }
        let mut out = Mat::zeros(n, self.dim());
        for i in 0..n {
            let j = rng.gen_range(0..stored);
            out.set_row(i, &self.samples.row(j));
        }
        out
    }

    pub fn fit_gaussian(&self) -> Result<GaussianEnv> {
        GaussianEnv::fit(&self.samples)
    }
}

/// Either kind of exogenous environment for a single model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Environment {
    Gaussian(GaussianEnv),
    Empirical(EmpiricalEnv),
}

impl Environment {
    pub fn dim(&self) -> usize {
        match self {
            Environment::Gaussian(g) => g.dim(),
            Environment::Empirical(e) => e.dim(),
        }
    }

    pub fn intervene(&self, iota: &Intervention) -> Result<Self> {
        Ok(match self {
            Environment::Gaussian(g) => Environment::Gaussian(g.intervene(iota)?),
            Environment::Empirical(e) => Environment::Empirical(e.intervene(iota)?),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Mat> {
        match self {
            Environment::Gaussian(g) => g.sample(n, rng),
            Environment::Empirical(e) => Ok(e.sample(n, rng)),
        }
    }
}

/// Product environment `ρℓ ⊗ ρh`; both levels always share a kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JointEnv {
    Gaussian { low: GaussianEnv, high: GaussianEnv },
    Empirical { low: EmpiricalEnv, high: EmpiricalEnv },
}

impl JointEnv {
    pub fn low(&self) -> Environment {
        match self {
            JointEnv::Gaussian { low, .. } => Environment::Gaussian(low.clone()),
            JointEnv::Empirical { low, .. } => Environment::Empirical(low.clone()),
        }
    }

    pub fn high(&self) -> Environment {
        match self {
            JointEnv::Gaussian { high, .. } => Environment::Gaussian(high.clone()),
            JointEnv::Empirical { high, .. } => Environment::Empirical(high.clone()),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            JointEnv::Gaussian { low, high } => (low.dim(), high.dim()),
            JointEnv::Empirical { low, high } => (low.dim(), high.dim()),
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, JointEnv::Gaussian { .. })
    }
}

/// Additive per-sample displacements `Θℓ`, `Θh` of the empirical environments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationPair {
    pub theta_low: Mat,
    pub theta_high: Mat,
}

impl PerturbationPair {
    pub fn zeros(n_low: usize, dim_low: usize, n_high: usize, dim_high: usize) -> Self {
        Self {
            theta_low: Mat::zeros(n_low, dim_low),
            theta_high: Mat::zeros(n_high, dim_high),
        }
    }

    /// Per-level radii actually used: `‖Θ_d‖_F / √N_d`.
    pub fn radii(&self) -> (f64, f64) {
        let r = |m: &Mat| {
            if m.nrows() == 0 {
                0.0
            } else {
                m.norm() / (m.nrows() as f64).sqrt()
            }
        };
        (r(&self.theta_low), r(&self.theta_high))
    }
}
