//! Gaussian-environment objective and its min-max solver.
//!
//! Per pair `(ι, η = ω(ι))` the low-level pushforward is
//! `N(T a, T C Tᵀ)` with `a = L μℓ_ι`, `C = L Σℓ_ι Lᵀ`, and the high-level one
//! is `N(b, S)` with `b = H μh_η`, `S = H Σh_η Hᵀ`. The squared Gelbrich
//! distance between them is evaluated through
//! `tr((S^{1/2} T C Tᵀ S^{1/2})^{1/2}) = ‖S^{1/2} T C^{1/2}‖_*`,
//! which is what makes the `T` gradient cheap.

use serde::{Deserialize, Serialize};

use super::{
    adjust_mean, check_finite_objective, mask_cov, mask_vec, AbstractionMap, FitTrace,
    ProblemInstance, SolverConfig,
};
use crate::env::{GaussianEnv, JointEnv};
use crate::error::{Error, Result};
use crate::geometry::{frobenius_prox, gaussian_w2_sq, project_gelbrich_ball};
use crate::linalg::{is_finite, nuclear_norm_and_polar, psd_sqrt, repair_psd, sym_eigen, Mat, Vector};

const TRACE_FLOOR: f64 = 1e-12;

/// Moments of one pair's pushforwards under a given environment.
struct PairMoments {
    q: f64,
    a: Vector,
    c: Mat,
    c_half: Mat,
    b: Vector,
    s_half: Mat,
    tr_s: f64,
}

fn gaussian_parts(env: &JointEnv) -> Result<(&GaussianEnv, &GaussianEnv)> {
    match env {
        JointEnv::Gaussian { low, high } => Ok((low, high)),
        JointEnv::Empirical { .. } => Err(Error::Dimension(
            "Gaussian solver given an empirical environment".into(),
        )),
    }
}

fn pair_moments(inst: &ProblemInstance, low: &GaussianEnv, high: &GaussianEnv) -> Result<Vec<PairMoments>> {
    inst.pairs()
        .iter()
        .map(|p| {
            let il = inst.low_intervention(p);
            let ih = inst.high_intervention(p);
            let a = &p.l * adjust_mean(low.mean(), il);
            let c = repair_psd(&(&p.l * mask_cov(low.cov(), il) * p.l.transpose()));
            let c_half = psd_sqrt(&c)?;
            let b = &p.h * adjust_mean(high.mean(), ih);
            let s = repair_psd(&(&p.h * mask_cov(high.cov(), ih) * p.h.transpose()));
            let s_half = psd_sqrt(&s)?;
            Ok(PairMoments {
                q: p.q,
                a,
                c,
                c_half,
                b,
                tr_s: s.trace(),
                s_half,
            })
        })
        .collect()
}

/// `lr_t`, capped at `1/L` with `L = 2 λmax(Σ q (a aᵀ + C))` the curvature of
/// the convex part; the nuclear-norm part is concave in `T`, so this step
/// cannot increase the objective.
fn t_step(lr_t: f64, pm: &[PairMoments]) -> f64 {
    let Some(first) = pm.first() else { return lr_t };
    let mut m = Mat::zeros(first.c.nrows(), first.c.ncols());
    for p in pm {
        m += (&p.a * p.a.transpose() + &p.c) * p.q;
    }
    let lmax = 2.0 * sym_eigen(&m).eigenvalues.amax();
    if lmax > 0.0 {
        lr_t.min(1.0 / lmax)
    } else {
        lr_t
    }
}

fn objective_from(t: &Mat, pm: &[PairMoments]) -> f64 {
    pm.iter()
        .map(|m| {
            let r = t * &m.a - &m.b;
            let tr_l = (t * &m.c * t.transpose()).trace();
            let (nuc, _) = nuclear_norm_and_polar(&(&m.s_half * t * &m.c_half));
            m.q * (r.norm_squared() + tr_l + m.tr_s - 2.0 * nuc).max(0.0)
        })
        .sum()
}

fn surrogate_from(t: &Mat, pm: &[PairMoments]) -> f64 {
    pm.iter()
        .map(|m| {
            let r = t * &m.a - &m.b;
            let tr_l = (t * &m.c * t.transpose()).trace().max(0.0);
            m.q * (r.norm_squared() + (tr_l.sqrt() - m.tr_s.sqrt()).powi(2))
        })
        .sum()
}

fn grad_t_from(t: &Mat, pm: &[PairMoments]) -> Mat {
    let mut g = Mat::zeros(t.nrows(), t.ncols());
    for m in pm {
        let r = t * &m.a - &m.b;
        let (_, polar) = nuclear_norm_and_polar(&(&m.s_half * t * &m.c_half));
        let term = &r * m.a.transpose() + t * &m.c - &m.s_half * polar * &m.c_half;
        g += term * (2.0 * m.q);
    }
    g
}

fn grad_means_from(t: &Mat, inst: &ProblemInstance, pm: &[PairMoments]) -> (Vector, Vector) {
    let (h, l) = inst.t_shape();
    let mut gl = Vector::zeros(l);
    let mut gh = Vector::zeros(h);
    for (p, m) in inst.pairs().iter().zip(pm) {
        let r = t * &m.a - &m.b;
        let mut dl = p.l.transpose() * t.transpose() * &r * (2.0 * m.q);
        mask_vec(&mut dl, inst.low_intervention(p));
        let mut dh = p.h.transpose() * &r * (-2.0 * m.q);
        mask_vec(&mut dh, inst.high_intervention(p));
        gl += dl;
        gh += dh;
    }
    (gl, gh)
}

/// Gradients of the surrogate with respect to the covariance matrices.
fn surrogate_cov_grads(t: &Mat, inst: &ProblemInstance, pm: &[PairMoments]) -> (Mat, Mat) {
    let (h, l) = inst.t_shape();
    let mut gl = Mat::zeros(l, l);
    let mut gh = Mat::zeros(h, h);
    let tt = t.transpose() * t;
    for (p, m) in inst.pairs().iter().zip(pm) {
        let tr_l = (t * &m.c * t.transpose()).trace();
        let kl = 1.0 - (m.tr_s / tr_l.max(TRACE_FLOOR)).sqrt();
        let kh = 1.0 - (tr_l.max(0.0) / m.tr_s.max(TRACE_FLOOR)).sqrt();
        let wl = mask_cov(&(p.l.transpose() * &tt * &p.l), inst.low_intervention(p));
        let wh = mask_cov(&(p.h.transpose() * &p.h), inst.high_intervention(p));
        gl += wl * (m.q * kl);
        gh += wh * (m.q * kh);
    }
    (gl, gh)
}

/// Expected squared Gelbrich distance between the `T`-pushed low-level
/// interventional laws and the paired high-level ones.
pub fn gaussian_objective(t: &Mat, env: &JointEnv, inst: &ProblemInstance) -> Result<f64> {
    inst.check_t(t)?;
    let (low, high) = gaussian_parts(env)?;
    Ok(objective_from(t, &pair_moments(inst, low, high)?))
}

/// Smooth upper-bounded relaxation: the nuclear-norm coupling term replaced
/// by the product of Frobenius norms of the two covariance roots.
pub fn gaussian_surrogate(t: &Mat, env: &JointEnv, inst: &ProblemInstance) -> Result<f64> {
    inst.check_t(t)?;
    let (low, high) = gaussian_parts(env)?;
    Ok(surrogate_from(t, &pair_moments(inst, low, high)?))
}

#[derive(Debug, Clone)]
pub struct GaussianGradients {
    pub t: Mat,
    pub mu_low: Vector,
    pub mu_high: Vector,
}

/// Gradients of [`gaussian_objective`] with respect to `T` and the two means.
pub fn gaussian_gradients(t: &Mat, env: &JointEnv, inst: &ProblemInstance) -> Result<GaussianGradients> {
    inst.check_t(t)?;
    let (low, high) = gaussian_parts(env)?;
    let pm = pair_moments(inst, low, high)?;
    let (mu_low, mu_high) = grad_means_from(t, inst, &pm);
    Ok(GaussianGradients {
        t: grad_t_from(t, &pm),
        mu_low,
        mu_high,
    })
}

/// Gradients of [`gaussian_surrogate`] with respect to covariance factors
/// `R_d` where `Σ_d = R_d R_dᵀ`.
pub fn surrogate_factor_gradients(
    t: &Mat,
    mu_low: &Vector,
    r_low: &Mat,
    mu_high: &Vector,
    r_high: &Mat,
    inst: &ProblemInstance,
) -> Result<(Mat, Mat)> {
    inst.check_t(t)?;
    let low = GaussianEnv::new(mu_low.clone(), r_low * r_low.transpose())?;
    let high = GaussianEnv::new(mu_high.clone(), r_high * r_high.transpose())?;
    let pm = pair_moments(inst, &low, &high)?;
    let (gl, gh) = surrogate_cov_grads(t, inst, &pm);
    Ok((gl * r_low * 2.0, gh * r_high * 2.0))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianFit {
    pub map: AbstractionMap,
    pub worst_env: JointEnv,
    pub trace: FitTrace,
}

fn diag_only(m: &Mat) -> Mat {
    Mat::from_diagonal(&m.diagonal())
}

/// One projected ascent step of the environment against the current `T`.
fn ascent_step(
    t: &Mat,
    inst: &ProblemInstance,
    cfg: &SolverConfig,
    cur: (&GaussianEnv, &GaussianEnv),
    nominal: (&GaussianEnv, &GaussianEnv),
) -> Result<(GaussianEnv, GaussianEnv)> {
    let (low, high) = cur;
    let pm = pair_moments(inst, low, high)?;
    let (g_mu_l, g_mu_h) = grad_means_from(t, inst, &pm);
    let (g_sig_l, g_sig_h) = surrogate_cov_grads(t, inst, &pm);
    let lambda = cfg.prox_weight();

    let step = |env: &GaussianEnv, g_mu: &Vector, g_sig: &Mat| -> Result<GaussianEnv> {
        let r = psd_sqrt(env.cov())?;
        let mut g_r = g_sig * &r * 2.0;
        if !cfg.full_covariance {
            g_r = diag_only(&g_r);
        }
        let r_new = frobenius_prox(&(r + g_r * cfg.lr_env), lambda);
        let mu_new = env.mean() + g_mu * cfg.lr_env;
        if !is_finite(&r_new) || mu_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { trace: Vec::new() });
        }
        GaussianEnv::new(mu_new, repair_psd(&(&r_new * r_new.transpose())))
    };
    let low_new = step(low, &g_mu_l, &g_sig_l)?;
    let high_new = step(high, &g_mu_h, &g_sig_h)?;
    Ok((
        project_gelbrich_ball(&low_new, nominal.0, cfg.eps_low)?,
        project_gelbrich_ball(&high_new, nominal.1, cfg.eps_high)?,
    ))
}

pub(crate) fn run_gaussian(inst: &ProblemInstance, cfg: &SolverConfig, adversarial: bool) -> Result<GaussianFit> {
    cfg.validate()?;
    let (nom_l, nom_h) = gaussian_parts(inst.env())?;
    let mut t = inst.initial_t(cfg)?;
    let mut low = nom_l.clone();
    let mut high = nom_h.clone();
    let mut trace = FitTrace::default();
    let mut prev = objective_from(&t, &pair_moments(inst, &low, &high)?);
    check_finite_objective(prev, &trace)?;

    for _ in 0..cfg.max_outer {
        let pm = pair_moments(inst, &low, &high)?;
        let lr = t_step(cfg.lr_t, &pm);
        for _ in 0..cfg.k_min {
            let g = grad_t_from(&t, &pm);
            t -= g * lr;
        }
        if adversarial {
            for _ in 0..cfg.k_max {
                let (l, h) = ascent_step(&t, inst, cfg, (&low, &high), (nom_l, nom_h)).map_err(|e| match e {
                    Error::Diverged { .. } => Error::Diverged {
                        trace: trace.objective.clone(),
                    },
                    other => other,
                })?;
                low = l;
                high = h;
            }
        }
        let f = objective_from(&t, &pair_moments(inst, &low, &high)?);
        check_finite_objective(f, &trace)?;
        if t.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                trace: trace.objective,
            });
        }
        let dl = gaussian_w2_sq(&low, nom_l)?.sqrt();
        let dh = gaussian_w2_sq(&high, nom_h)?.sqrt();
        trace.push(f, dl, dh);
        if (f - prev).abs() < cfg.tol {
            trace.converged = true;
            break;
        }
        prev = f;
    }
    Ok(GaussianFit {
        map: AbstractionMap::new(t)?,
        worst_env: JointEnv::Gaussian { low, high },
        trace,
    })
}

/// Alternating descent on `T` and projected ascent on the environments
/// inside the per-level Gelbrich balls.
pub fn fit_diroca_gaussian(inst: &ProblemInstance, cfg: &SolverConfig) -> Result<GaussianFit> {
    run_gaussian(inst, cfg, true)
}
