//! Learning the abstraction matrix `T`.
//!
//! Every solver works on a [`ProblemInstance`]: the two models, the
//! intervention map ω, the nominal joint environment and a distribution `q`
//! over low-level interventions. The Gaussian solvers read the nominal moments,
//! the empirical solvers read nominal exogenous sample matrices.

pub mod baselines;
pub mod empirical;
pub mod gaussian;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::env::JointEnv;
use crate::error::{config_err, Error, Result};
use crate::linalg::{column_means, least_squares, Mat, Vector};
use crate::scm::{Intervention, InterventionMap, LinearScm};

pub use baselines::{fit_abslin, fit_bary, fit_grad, AbsLinVariant};
pub use empirical::{empirical_objective, fit_diroca_empirical, EmpiricalFit};
pub use gaussian::{fit_diroca_gaussian, gaussian_objective, gaussian_surrogate, GaussianFit};

/// The linear map `τ(x) = T x` from the low-level to the high-level model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractionMap {
    t: Mat,
}

impl AbstractionMap {
    pub fn new(t: Mat) -> Result<Self> {
        if t.nrows() > t.ncols() {
            return Err(Error::Dimension(format!(
                "abstraction must not enlarge the model, got {}x{}",
                t.nrows(),
                t.ncols()
            )));
        }
        if t.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("non-finite abstraction entry".into()));
        }
        Ok(Self { t })
    }

    pub fn matrix(&self) -> &Mat {
        &self.t
    }

    pub fn into_matrix(self) -> Mat {
        self.t
    }

    /// `(h, ℓ)`.
    pub fn shape(&self) -> (usize, usize) {
        self.t.shape()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum TInit {
    /// Least squares between nominal pushforward means across interventions,
    /// falling back to small Gaussian noise when that system is degenerate.
    MeanLeastSquares,
    /// I.i.d. `N(0, 0.01)` entries.
    Random,
    Given(Mat),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub eps_low: f64,
    pub eps_high: f64,
    pub lr_t: f64,
    pub lr_env: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub max_outer: usize,
    pub tol: f64,
    pub seed: u64,
    pub t_init: TInit,
    /// Weight of the Frobenius prox on covariance factors; `None` uses `lr_env`.
    pub prox_lambda: Option<f64>,
    /// Let the adversary build correlated exogenous covariances. Off by
    /// default, which keeps worst-case environments Markovian.
    pub full_covariance: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps_low: 0.0,
            eps_high: 0.0,
            lr_t: 1e-2,
            lr_env: 1e-3,
            k_min: 5,
            k_max: 2,
            max_outer: 500,
            tol: 1e-4,
            seed: 0,
            t_init: TInit::MeanLeastSquares,
            prox_lambda: None,
            full_covariance: false,
        }
    }
}

impl SolverConfig {
    pub fn with_radii(mut self, eps_low: f64, eps_high: f64) -> Self {
        self.eps_low = eps_low;
        self.eps_high = eps_high;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("eps_low", self.eps_low), ("eps_high", self.eps_high)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(config_err(field, "radius must be finite and >= 0"));
            }
        }
        for (field, v) in [("lr_t", self.lr_t), ("lr_env", self.lr_env), ("tol", self.tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config_err(field, "must be positive"));
            }
        }
        if self.k_min == 0 {
            return Err(config_err("k_min", "must be >= 1"));
        }
        if self.k_max == 0 {
            return Err(config_err("k_max", "must be >= 1"));
        }
        if let Some(l) = self.prox_lambda {
            if !(l >= 0.0) {
                return Err(config_err("prox_lambda", "must be >= 0"));
            }
        }
        Ok(())
    }

    pub(crate) fn prox_weight(&self) -> f64 {
        self.prox_lambda.unwrap_or(self.lr_env)
    }
}

/// Per-outer-iteration record: objective after the iteration and the
/// distance of the current environment iterate to the nominal one per level.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub objective: Vec<f64>,
    pub dist_low: Vec<f64>,
    pub dist_high: Vec<f64>,
    pub converged: bool,
}

impl FitTrace {
    pub fn iterations(&self) -> usize {
        self.objective.len()
    }

    pub fn last_objective(&self) -> Option<f64> {
        self.objective.last().copied()
    }

    pub(crate) fn push(&mut self, f: f64, dl: f64, dh: f64) {
        self.objective.push(f);
        self.dist_low.push(dl);
        self.dist_high.push(dh);
    }
}

/// Structural data of one `(ι, ω(ι))` pair.
#[derive(Debug, Clone)]
pub(crate) struct PairOps {
    pub low_idx: usize,
    pub high_idx: usize,
    pub q: f64,
    pub l: Mat,
    pub h: Mat,
}

#[derive(Debug, Clone)]
pub struct ProblemInstance {
    low_scm: LinearScm,
    high_scm: LinearScm,
    omega: InterventionMap,
    env: JointEnv,
    q: Vec<f64>,
    pairs: Vec<PairOps>,
}

impl ProblemInstance {
    pub fn new(
        low_scm: LinearScm,
        high_scm: LinearScm,
        omega: InterventionMap,
        env: JointEnv,
        q: Vec<f64>,
    ) -> Result<Self> {
        if q.len() != omega.len() {
            return Err(Error::Dimension(format!(
                "q has {} entries for {} interventions",
                q.len(),
                omega.len()
            )));
        }
        if q.iter().any(|&w| !(w >= 0.0)) || (q.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(config_err("q", "must be a probability vector"));
        }
        if high_scm.dim() > low_scm.dim() {
            return Err(Error::Dimension(format!(
                "high-level model ({}) is larger than the low-level model ({})",
                high_scm.dim(),
                low_scm.dim()
            )));
        }
        let (dl, dh) = env.dims();
        if dl != low_scm.dim() || dh != high_scm.dim() {
            return Err(Error::Dimension(format!(
                "environment dimensions ({dl}, {dh}) do not match models ({}, {})",
                low_scm.dim(),
                high_scm.dim()
            )));
        }
        if let JointEnv::Empirical { low, high } = &env {
            if low.n_samples() != high.n_samples() {
                return Err(Error::Dimension(format!(
                    "empirical environments need equal sample counts, got {} and {}",
                    low.n_samples(),
                    high.n_samples()
                )));
            }
        }
        let mut pairs = Vec::with_capacity(omega.len());
        for (i, j) in omega.index_pairs() {
            let l = low_scm.reduced_transform(&omega.low()[i])?;
            let h = high_scm.reduced_transform(&omega.high()[j])?;
            pairs.push(PairOps {
                low_idx: i,
                high_idx: j,
                q: q[i],
                l,
                h,
            });
        }
        Ok(Self {
            low_scm,
            high_scm,
            omega,
            env,
            q,
            pairs,
        })
    }

    /// Uniform `q` over the low-level interventions.
    pub fn uniform(
        low_scm: LinearScm,
        high_scm: LinearScm,
        omega: InterventionMap,
        env: JointEnv,
    ) -> Result<Self> {
        let n = omega.len().max(1);
        let q = vec![1.0 / n as f64; omega.len()];
        Self::new(low_scm, high_scm, omega, env, q)
    }

    pub fn low_scm(&self) -> &LinearScm {
        &self.low_scm
    }

    pub fn high_scm(&self) -> &LinearScm {
        &self.high_scm
    }

    pub fn omega(&self) -> &InterventionMap {
        &self.omega
    }

    pub fn env(&self) -> &JointEnv {
        &self.env
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// `(h, ℓ)`, the shape of `T`.
    pub fn t_shape(&self) -> (usize, usize) {
        (self.high_scm.dim(), self.low_scm.dim())
    }

    /// Same models and map with a different nominal environment.
    pub fn with_env(&self, env: JointEnv) -> Result<Self> {
        Self::new(
            self.low_scm.clone(),
            self.high_scm.clone(),
            self.omega.clone(),
            env,
            self.q.clone(),
        )
    }

    pub(crate) fn pairs(&self) -> &[PairOps] {
        &self.pairs
    }

    pub(crate) fn low_intervention(&self, p: &PairOps) -> &Intervention {
        &self.omega.low()[p.low_idx]
    }

    pub(crate) fn high_intervention(&self, p: &PairOps) -> &Intervention {
        &self.omega.high()[p.high_idx]
    }

    pub(crate) fn check_t(&self, t: &Mat) -> Result<()> {
        if t.shape() != self.t_shape() {
            return Err(Error::Dimension(format!(
                "T is {:?}, instance expects {:?}",
                t.shape(),
                self.t_shape()
            )));
        }
        Ok(())
    }

    /// Nominal exogenous means per level (sample means in the empirical case).
    fn nominal_means(&self) -> (Vector, Vector) {
        match &self.env {
            JointEnv::Gaussian { low, high } => (low.mean().clone(), high.mean().clone()),
            JointEnv::Empirical { low, high } => {
                (column_means(low.samples()), column_means(high.samples()))
            }
        }
    }

    pub(crate) fn initial_t(&self, cfg: &SolverConfig) -> Result<Mat> {
        let (h, l) = self.t_shape();
        match &cfg.t_init {
            TInit::Given(t) => {
                self.check_t(t)?;
                Ok(t.clone())
            }
            TInit::Random => Ok(random_t(h, l, cfg.seed)),
            TInit::MeanLeastSquares => {
                let (mu_l, mu_h) = self.nominal_means();
                let n = self.pairs.len();
                let mut a = Mat::zeros(n, l);
                let mut b = Mat::zeros(n, h);
                for (k, p) in self.pairs.iter().enumerate() {
                    let ml = adjust_mean(&mu_l, self.low_intervention(p));
                    let mh = adjust_mean(&mu_h, self.high_intervention(p));
                    let w = p.q.sqrt();
                    a.set_row(k, &(&p.l * ml * w).transpose());
                    b.set_row(k, &(&p.h * mh * w).transpose());
                }
                match least_squares(&a, &b) {
                    Ok(tt) => Ok(tt.transpose()),
                    Err(_) => Ok(random_t(h, l, cfg.seed)),
                }
            }
        }
    }
}

fn random_t(h: usize, l: usize, seed: u64) -> Mat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 0.1).expect("valid normal");
    Mat::from_fn(h, l, |_, _| normal.sample(&mut rng))
}

/// Mean vector with intervened coordinates replaced by their values.
pub(crate) fn adjust_mean(mu: &Vector, iota: &Intervention) -> Vector {
    let mut out = mu.clone();
    for (t, v) in iota.pairs() {
        out[t] = v;
    }
    out
}

/// Zeroes the rows and columns of intervened coordinates.
pub(crate) fn mask_cov(sigma: &Mat, iota: &Intervention) -> Mat {
    let mut out = sigma.clone();
    for &t in iota.targets() {
        out.row_mut(t).fill(0.0);
        out.column_mut(t).fill(0.0);
    }
    out
}

pub(crate) fn mask_vec(v: &mut Vector, iota: &Intervention) {
    for &t in iota.targets() {
        v[t] = 0.0;
    }
}

pub(crate) fn check_finite_objective(f: f64, trace: &FitTrace) -> Result<()> {
    if f.is_finite() {
        Ok(())
    } else {
        let mut t = trace.objective.clone();
        t.push(f);
        Err(Error::Diverged { trace: t })
    }
}
