//! Bures–Wasserstein geometry of Gaussian environments and the Frobenius-ball
//! tools used for sample perturbations.

use crate::env::{EmpiricalEnv, GaussianEnv, JointEnv};
use crate::error::{Error, Result};
use crate::linalg::{check_psd, pd_inv_sqrt, psd_sqrt, repair_psd, sym_eigen, symmetrize, Mat, Vector};

/// Squared 2-Wasserstein (Gelbrich) distance between two Gaussians given by
/// their moments.
pub fn gelbrich_distance_sq(m1: &Vector, s1: &Mat, m2: &Vector, s2: &Mat) -> Result<f64> {
    if m1.len() != m2.len() || s1.shape() != s2.shape() || s1.nrows() != m1.len() {
        return Err(Error::Dimension(format!(
            "moment dimensions differ: ({}, {:?}) vs ({}, {:?})",
            m1.len(),
            s1.shape(),
            m2.len(),
            s2.shape()
        )));
    }
    check_psd(s2)?;
    let r1 = psd_sqrt(s1)?;
    let cross = bures_cross_term(&r1, s2);
    let d = (m1 - m2).norm_squared() + s1.trace() + s2.trace() - 2.0 * cross;
    Ok(d.max(0.0))
}

/// `tr((R Σ R)^{1/2})` for a symmetric root `R`.
fn bures_cross_term(r1: &Mat, s2: &Mat) -> f64 {
    let inner = symmetrize(&(r1 * s2 * r1));
    let eig = sym_eigen(&inner);
    eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).sum()
}

pub fn gaussian_w2_sq(a: &GaussianEnv, b: &GaussianEnv) -> Result<f64> {
    gelbrich_distance_sq(a.mean(), a.cov(), b.mean(), b.cov())
}

/// Index-paired mean squared displacement `(1/N) Σ‖uᵢ − vᵢ‖²`.
pub fn paired_w2_sq(a: &EmpiricalEnv, b: &EmpiricalEnv) -> Result<f64> {
    if a.samples().shape() != b.samples().shape() {
        return Err(Error::Dimension(format!(
            "paired distance needs equal shapes, got {:?} and {:?}",
            a.samples().shape(),
            b.samples().shape()
        )));
    }
    Ok((a.samples() - b.samples()).norm_squared() / a.n_samples() as f64)
}

/// Squared distance between product environments: the sum of the per-level
/// squared distances.
pub fn joint_w2_sq(a: &JointEnv, b: &JointEnv) -> Result<f64> {
    match (a, b) {
        (JointEnv::Gaussian { low: l1, high: h1 }, JointEnv::Gaussian { low: l2, high: h2 }) => {
            Ok(gaussian_w2_sq(l1, l2)? + gaussian_w2_sq(h1, h2)?)
        }
        (JointEnv::Empirical { low: l1, high: h1 }, JointEnv::Empirical { low: l2, high: h2 }) => {
            Ok(paired_w2_sq(l1, l2)? + paired_w2_sq(h1, h2)?)
        }
        _ => Err(Error::Dimension(
            "cannot compare Gaussian and empirical environments".into(),
        )),
    }
}

/// Pulls `env` back into the Gelbrich ball of radius `eps` around `center`.
///
/// The step follows the segment from `center` to `env` in `(μ, Σ^{1/2})`
/// coordinates, scaled by `α = eps / W₂`. Outside the commuting case that
/// scaling can land slightly outside the ball, so the segment parameter is
/// then shrunk by bisection until the constraint holds.
pub fn project_gelbrich_ball(env: &GaussianEnv, center: &GaussianEnv, eps: f64) -> Result<GaussianEnv> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidModel(format!("ball radius must be >= 0, got {eps}")));
    }
    let dist = gaussian_w2_sq(env, center)?.sqrt();
    if dist <= eps {
        return Ok(env.clone());
    }
    if eps == 0.0 {
        return Ok(center.clone());
    }
    let rc = psd_sqrt(center.cov())?;
    let re = psd_sqrt(env.cov())?;
    let at = |t: f64| -> Result<GaussianEnv> {
        let mean = center.mean() + (env.mean() - center.mean()) * t;
        let r = &rc + (&re - &rc) * t;
        GaussianEnv::new(mean, repair_psd(&(&r * &r)))
    };
    let alpha = eps / dist;
    let candidate = at(alpha)?;
    if gaussian_w2_sq(&candidate, center)?.sqrt() <= eps {
        return Ok(candidate);
    }
    let (mut lo, mut hi) = (0.0, alpha);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if gaussian_w2_sq(&at(mid)?, center)?.sqrt() <= eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(lo)
}

pub fn project_frobenius_ball(theta: &Mat, bound: f64) -> Mat {
    let norm = theta.norm();
    if norm <= bound {
        theta.clone()
    } else if bound <= 0.0 {
        Mat::zeros(theta.nrows(), theta.ncols())
    } else {
        theta * (bound / norm)
    }
}

/// Proximal operator of `λ‖·‖_F`: block soft-thresholding.
pub fn frobenius_prox(a: &Mat, lambda: f64) -> Mat {
    let norm = a.norm();
    if norm > lambda {
        a * (1.0 - lambda / norm)
    } else {
        Mat::zeros(a.nrows(), a.ncols())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BarycenterOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BarycenterOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
        }
    }
}

/// Wasserstein barycenter of Gaussians. Mean is the weighted average; the
/// covariance solves `Σ = Σⱼ λⱼ (Σ^{1/2} Σⱼ Σ^{1/2})^{1/2}` by damped fixed-point
/// iteration (full steps, halved once the residual stops shrinking).
pub fn barycenter_gaussian(envs: &[GaussianEnv], weights: &[f64], opts: BarycenterOptions) -> Result<GaussianEnv> {
    if envs.is_empty() || envs.len() != weights.len() {
        return Err(Error::Dimension(format!(
            "{} environments with {} weights",
            envs.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|&w| !(w > 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidModel("barycenter weights must be positive and sum to 1".into()));
    }
    let d = envs[0].dim();
    if envs.iter().any(|e| e.dim() != d) {
        return Err(Error::Dimension("barycenter inputs differ in dimension".into()));
    }
    let mut mean = Vector::zeros(d);
    let mut sigma = Mat::zeros(d, d);
    for (e, &w) in envs.iter().zip(weights) {
        mean += e.mean() * w;
        sigma += e.cov() * w;
    }
    let mut gamma = 1.0;
    let mut last = f64::INFINITY;
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let root = psd_sqrt(&sigma)?;
        let mut rhs = Mat::zeros(d, d);
        for (e, &w) in envs.iter().zip(weights) {
            rhs += psd_sqrt(&symmetrize(&(&root * e.cov() * &root)))? * w;
        }
        residual = (&rhs - &sigma).norm();
        if residual <= opts.tol {
            return GaussianEnv::new(mean, sigma);
        }
        if residual > last && gamma == 1.0 {
            gamma = 0.5;
        }
        last = residual;
        sigma = repair_psd(&(&sigma * (1.0 - gamma) + rhs * gamma));
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

/// Optimal affine transport map `x ↦ A x + offset` between two Gaussians.
pub fn monge_map_gaussian(src: &GaussianEnv, dst: &GaussianEnv) -> Result<(Mat, Vector)> {
    if src.dim() != dst.dim() {
        return Err(Error::Dimension("Monge map needs equal dimensions".into()));
    }
    let r2 = psd_sqrt(dst.cov())?;
    let inner = symmetrize(&(&r2 * src.cov() * &r2));
    let inv = pd_inv_sqrt(&inner, "source covariance")?;
    let a = symmetrize(&(&r2 * inv * &r2));
    let offset = dst.mean() - &a * src.mean();
    Ok((a, offset))
}
