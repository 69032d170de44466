//! Non-robust baselines: plain gradient matching, barycentric matching and
//! least-squares regression between observational samples.

use serde::{Deserialize, Serialize};

use super::empirical::{run_empirical, Quadratic};
use super::gaussian::run_gaussian;
use super::{AbstractionMap, FitTrace, ProblemInstance, SolverConfig};
use crate::env::{GaussianEnv, JointEnv};
use crate::error::{Error, Result};
use crate::geometry::{barycenter_gaussian, BarycenterOptions};
use crate::linalg::{least_squares, pd_inv_sqrt, psd_sqrt, sym_eigen, Mat};

/// Minimizes the matching objective against the fixed nominal environment.
pub fn fit_grad(inst: &ProblemInstance, cfg: &SolverConfig) -> Result<(AbstractionMap, FitTrace)> {
    if inst.env().is_gaussian() {
        let fit = run_gaussian(inst, cfg, false)?;
        Ok((fit.map, fit.trace))
    } else {
        let fit = run_empirical(inst, cfg, false)?;
        Ok((fit.map, fit.trace))
    }
}

/// Top-`k` eigenvectors (columns, by decreasing eigenvalue), each flipped so
/// that its largest-magnitude entry is positive.
fn leading_eigenvectors(m: &Mat, k: usize) -> Mat {
    let eig = sym_eigen(m);
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut v = Mat::zeros(m.nrows(), k);
    for (c, &j) in order.iter().take(k).enumerate() {
        let mut col = eig.eigenvectors.column(j).into_owned();
        let pivot = col.iter().cloned().fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            col.neg_mut();
        }
        v.set_column(c, &col);
    }
    v
}

fn bary_gaussian(inst: &ProblemInstance, low: &GaussianEnv, high: &GaussianEnv) -> Result<Mat> {
    let omega = inst.omega();
    let lows = omega
        .low()
        .iter()
        .map(|i| low.intervene(i)?.pushforward(&inst.low_scm().reduced_transform(i)?))
        .collect::<Result<Vec<_>>>()?;
    let highs = omega
        .high()
        .iter()
        .map(|i| high.intervene(i)?.pushforward(&inst.high_scm().reduced_transform(i)?))
        .collect::<Result<Vec<_>>>()?;
    let opts = BarycenterOptions::default();
    let bl = barycenter_gaussian(&lows, &vec![1.0 / lows.len() as f64; lows.len()], opts)?;
    let bh = barycenter_gaussian(&highs, &vec![1.0 / highs.len() as f64; highs.len()], opts)?;
    let (h, _) = inst.t_shape();
    let v = leading_eigenvectors(bl.cov(), h);
    let proj = v.transpose() * bl.cov() * &v;
    let a = psd_sqrt(bh.cov())? * pd_inv_sqrt(&proj, "projected low-level barycenter covariance")?;
    Ok(a * v.transpose())
}

fn bary_empirical(inst: &ProblemInstance, ul: &Mat, uh: &Mat, cfg: &SolverConfig) -> Result<Mat> {
    let omega = inst.omega();
    let (h, l) = inst.t_shape();
    let mut lbar = Mat::zeros(l, l);
    for i in omega.low() {
        lbar += inst.low_scm().reduced_transform(i)?;
    }
    lbar /= omega.low().len() as f64;
    let mut hbar = Mat::zeros(h, h);
    for i in omega.high() {
        hbar += inst.high_scm().reduced_transform(i)?;
    }
    hbar /= omega.high().len() as f64;
    let mut quad = Quadratic::new(l, h);
    quad.accumulate(&(ul * lbar.transpose()), &(uh * hbar.transpose()), 1.0);

    let mut t = inst.initial_t(cfg)?;
    let mut prev = quad.value(&t);
    let lr = quad.step(cfg.lr_t);
    for _ in 0..cfg.max_outer {
        for _ in 0..cfg.k_min {
            let g = quad.grad(&t);
            t -= g * lr;
        }
        let f = quad.value(&t);
        if !f.is_finite() {
            return Err(Error::Diverged { trace: vec![f] });
        }
        if (f - prev).abs() < cfg.tol {
            break;
        }
        prev = f;
    }
    Ok(t)
}

/// Maps barycenters of the interventional distributions onto each other.
///
/// Gaussian environments: `T = A Vᵀ` with `V` the leading eigenvectors of the
/// low-level barycentric covariance and `A = Σh^{1/2} (Vᵀ Σℓ V)^{-1/2}`.
/// Empirical environments: gradient descent on the sample matching objective
/// under the averaged reduced forms.
pub fn fit_bary(inst: &ProblemInstance, cfg: &SolverConfig) -> Result<AbstractionMap> {
    cfg.validate()?;
    let t = match inst.env() {
        JointEnv::Gaussian { low, high } => bary_gaussian(inst, low, high)?,
        JointEnv::Empirical { low, high } => bary_empirical(inst, low.samples(), high.samples(), cfg)?,
    };
    AbstractionMap::new(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbsLinVariant {
    Perfect,
    Noisy,
}

fn soft_threshold(m: &Mat, k: f64) -> Mat {
    m.map(|v| v.signum() * (v.abs() - k).max(0.0))
}

/// Regression of high-level on low-level observational samples:
/// ordinary least squares (`Perfect`) or an L1-penalized fit solved by
/// proximal gradient, warm-started at the least-squares solution (`Noisy`).
pub fn fit_abslin(x_low: &Mat, x_high: &Mat, variant: AbsLinVariant, reg: f64) -> Result<AbstractionMap> {
    if x_low.nrows() != x_high.nrows() {
        return Err(Error::Dimension(format!(
            "{} low-level rows but {} high-level rows",
            x_low.nrows(),
            x_high.nrows()
        )));
    }
    if x_low.nrows() <= x_low.ncols() {
        return Err(Error::RankDeficient(format!(
            "need more rows than low-level variables, got {}",
            x_low.nrows()
        )));
    }
    if !(reg >= 0.0) {
        return Err(Error::InvalidModel("regularization must be >= 0".into()));
    }
    let ols = least_squares(x_low, x_high)?.transpose();
    let t = match variant {
        AbsLinVariant::Perfect => ols,
        AbsLinVariant::Noisy => {
            let n = x_low.nrows() as f64;
            let gram = x_low.tr_mul(x_low) / n;
            let cross = x_high.tr_mul(x_low) / n;
            let lip = sym_eigen(&gram).eigenvalues.amax().max(f64::MIN_POSITIVE);
            let step = 1.0 / lip;
            let mut t = ols;
            for _ in 0..100_000 {
                let g = &t * &gram - &cross;
                let next = soft_threshold(&(&t - g * step), reg * step);
                let change = (&next - &t).amax();
                t = next;
                if change < 1e-13 {
                    break;
                }
            }
            t
        }
    };
    AbstractionMap::new(t)
}
