//! Sample-based objective and its min-max solver over Frobenius-bounded
//! perturbations of the nominal exogenous samples.
//!
//! All objectives are divided by the sample count `N`, so an adversary budget
//! `‖Θ‖_F ≤ ε√N` corresponds to a root-mean-square displacement of `ε`.

use serde::{Deserialize, Serialize};

use super::{check_finite_objective, AbstractionMap, FitTrace, ProblemInstance, SolverConfig};
use crate::env::{EmpiricalEnv, JointEnv, PerturbationPair};
use crate::error::{Error, Result};
use crate::geometry::project_frobenius_ball;
use crate::linalg::{sym_eigen, Mat, Vector};
use crate::scm::Intervention;

/// `F(T) = tr(T Gxx Tᵀ) − 2⟨T, Gxyᵀ⟩ + gyy` for fixed samples.
#[derive(Debug, Clone)]
pub(crate) struct Quadratic {
    pub gxx: Mat,
    pub gxy: Mat,
    pub gyy: f64,
}

impl Quadratic {
    pub fn new(l: usize, h: usize) -> Self {
        Self {
            gxx: Mat::zeros(l, l),
            gxy: Mat::zeros(l, h),
            gyy: 0.0,
        }
    }

    /// Adds `w ‖X Tᵀ − Y‖²_F / N`.
    pub fn accumulate(&mut self, x: &Mat, y: &Mat, w: f64) {
        let n = x.nrows() as f64;
        self.gxx += x.tr_mul(x) * (w / n);
        self.gxy += x.tr_mul(y) * (w / n);
        self.gyy += y.norm_squared() * w / n;
    }

    pub fn value(&self, t: &Mat) -> f64 {
        let quad = (t * &self.gxx).component_mul(t).sum();
        let cross = t.transpose().component_mul(&self.gxy).sum();
        (quad - 2.0 * cross + self.gyy).max(0.0)
    }

    /// `lr`, capped at the inverse curvature `1 / (2 λmax(gxx))`.
    pub fn step(&self, lr: f64) -> f64 {
        let lmax = 2.0 * sym_eigen(&self.gxx).eigenvalues.amax();
        if lmax > 0.0 {
            lr.min(1.0 / lmax)
        } else {
            lr
        }
    }

    pub fn grad(&self, t: &Mat) -> Mat {
        (t * &self.gxx - self.gxy.transpose()) * 2.0
    }
}

fn empirical_parts(env: &JointEnv) -> Result<(&EmpiricalEnv, &EmpiricalEnv)> {
    match env {
        JointEnv::Empirical { low, high } => Ok((low, high)),
        JointEnv::Gaussian { .. } => Err(Error::Dimension(
            "empirical solver given a Gaussian environment".into(),
        )),
    }
}

fn check_samples(inst: &ProblemInstance, ul: &Mat, uh: &Mat) -> Result<()> {
    let (h, l) = inst.t_shape();
    if ul.ncols() != l || uh.ncols() != h {
        return Err(Error::Dimension(format!(
            "sample widths ({}, {}) do not match models ({l}, {h})",
            ul.ncols(),
            uh.ncols()
        )));
    }
    if ul.nrows() != uh.nrows() {
        return Err(Error::Dimension(format!(
            "low-level has {} samples, high-level has {}",
            ul.nrows(),
            uh.nrows()
        )));
    }
    Ok(())
}

/// Gram blocks and column sums of the (perturbed) exogenous samples. Every
/// pair's pushforward is an affine image `U P + 1 aᵀ` of these samples, so
/// the objective and all gradients follow from this summary.
struct SampleMoments {
    n: f64,
    g_ll: Mat,
    g_lh: Mat,
    g_hh: Mat,
    s_l: Vector,
    s_h: Vector,
}

impl SampleMoments {
    fn new(ul: &Mat, uh: &Mat) -> Self {
        Self {
            n: ul.nrows() as f64,
            g_ll: ul.tr_mul(ul),
            g_lh: ul.tr_mul(uh),
            g_hh: uh.tr_mul(uh),
            s_l: column_sums(ul),
            s_h: column_sums(uh),
        }
    }
}

fn column_sums(u: &Mat) -> Vector {
    Vector::from_iterator(u.ncols(), u.column_iter().map(|c| c.sum()))
}

/// `adj_ι(U) Mᵀ = U P + 1 aᵀ` with `P = D_ι Mᵀ` and `a = M v_ι`.
fn affine_parts(iota: &Intervention, m: &Mat) -> (Mat, Vector) {
    let mut p = m.transpose();
    let mut v = Vector::zeros(m.ncols());
    for (t, val) in iota.pairs() {
        p.row_mut(t).fill(0.0);
        v[t] = val;
    }
    (p, m * v)
}

struct PairAffine {
    q: f64,
    p: Mat,
    a: Vector,
    qh: Mat,
    b: Vector,
    l: Mat,
    h: Mat,
    mask_l: Vec<bool>,
    mask_h: Vec<bool>,
}

fn pair_affines(inst: &ProblemInstance) -> Vec<PairAffine> {
    let (h, l) = inst.t_shape();
    inst.pairs()
        .iter()
        .map(|pr| {
            let il = inst.low_intervention(pr);
            let ih = inst.high_intervention(pr);
            let (p, a) = affine_parts(il, &pr.l);
            let (qh, b) = affine_parts(ih, &pr.h);
            PairAffine {
                q: pr.q,
                p,
                a,
                qh,
                b,
                l: pr.l.clone(),
                h: pr.h.clone(),
                mask_l: il.keep_mask(l),
                mask_h: ih.keep_mask(h),
            }
        })
        .collect()
}

fn quadratic_from(pa: &[PairAffine], m: &SampleMoments, l: usize, h: usize) -> Quadratic {
    let mut quad = Quadratic::new(l, h);
    for x in pa {
        let pt = x.p.transpose();
        let ps = &pt * &m.s_l;
        let xx = &pt * &m.g_ll * &x.p + &ps * x.a.transpose() + &x.a * ps.transpose()
            + &x.a * x.a.transpose() * m.n;
        let xy = &pt * &m.g_lh * &x.qh + &ps * x.b.transpose()
            + &x.a * (x.qh.transpose() * &m.s_h).transpose()
            + &x.a * x.b.transpose() * m.n;
        let yy = (x.qh.transpose() * &m.g_hh * &x.qh).trace()
            + 2.0 * (x.qh.transpose() * &m.s_h).dot(&x.b)
            + m.n * x.b.norm_squared();
        quad.gxx += xx * (x.q / m.n);
        quad.gxy += xy * (x.q / m.n);
        quad.gyy += yy * x.q / m.n;
    }
    quad
}

pub(crate) fn quadratic(inst: &ProblemInstance, ul: &Mat, uh: &Mat) -> Quadratic {
    let (h, l) = inst.t_shape();
    quadratic_from(&pair_affines(inst), &SampleMoments::new(ul, uh), l, h)
}

fn mask_cols(m: &mut Mat, keep: &[bool]) {
    for (j, &k) in keep.iter().enumerate() {
        if !k {
            m.column_mut(j).fill(0.0);
        }
    }
}

/// Gradients with respect to the perturbed sample matrices (equivalently the
/// perturbations), intervened columns masked. Each is `Uℓ A + Uh B + 1 cᵀ`.
fn sample_grads_from(t: &Mat, pa: &[PairAffine], ul: &Mat, uh: &Mat) -> (Mat, Mat) {
    let n = ul.nrows() as f64;
    let (l, h) = (ul.ncols(), uh.ncols());
    let (mut a_ll, mut a_hl, mut c_l) = (Mat::zeros(l, l), Mat::zeros(h, l), Vector::zeros(l));
    let (mut a_lh, mut a_hh, mut c_h) = (Mat::zeros(l, h), Mat::zeros(h, h), Vector::zeros(h));
    for x in pa {
        // residual R = Uℓ P Tᵀ − Uh Qh + 1 (T a − b)ᵀ
        let ptt = &x.p * t.transpose();
        let r0 = t * &x.a - &x.b;
        let mut tl = t * &x.l;
        mask_cols(&mut tl, &x.mask_l);
        let mut hd = x.h.clone();
        mask_cols(&mut hd, &x.mask_h);
        let w = 2.0 * x.q / n;
        a_ll += &ptt * &tl * w;
        a_hl -= &x.qh * &tl * w;
        c_l += tl.transpose() * &r0 * w;
        a_lh -= &ptt * &hd * w;
        a_hh += &x.qh * &hd * w;
        c_h -= hd.transpose() * &r0 * w;
    }
    let mut gl = ul * a_ll + uh * a_hl;
    for mut row in gl.row_iter_mut() {
        row += c_l.transpose();
    }
    let mut gh = ul * a_lh + uh * a_hh;
    for mut row in gh.row_iter_mut() {
        row += c_h.transpose();
    }
    (gl, gh)
}

#[cfg(test)]
fn sample_grads(t: &Mat, inst: &ProblemInstance, ul: &Mat, uh: &Mat) -> (Mat, Mat) {
    sample_grads_from(t, &pair_affines(inst), ul, uh)
}

/// `Σ_ι q(ι) ‖X̃ℓ_ι Tᵀ − X̃h_ι‖²_F / N` for the (already perturbed) exogenous
/// samples in `env`, where `X̃` are the intervention-adjusted pushforwards.
pub fn empirical_objective(t: &Mat, env: &JointEnv, inst: &ProblemInstance) -> Result<f64> {
    inst.check_t(t)?;
    let (low, high) = empirical_parts(env)?;
    check_samples(inst, low.samples(), high.samples())?;
    Ok(quadratic(inst, low.samples(), high.samples()).value(t))
}

#[derive(Debug, Clone)]
pub struct EmpiricalGradients {
    pub t: Mat,
    pub theta_low: Mat,
    pub theta_high: Mat,
}

pub fn empirical_gradients(t: &Mat, env: &JointEnv, inst: &ProblemInstance) -> Result<EmpiricalGradients> {
    inst.check_t(t)?;
    let (low, high) = empirical_parts(env)?;
    check_samples(inst, low.samples(), high.samples())?;
    let pa = pair_affines(inst);
    let (h, l) = inst.t_shape();
    let quad = quadratic_from(&pa, &SampleMoments::new(low.samples(), high.samples()), l, h);
    let (theta_low, theta_high) = sample_grads_from(t, &pa, low.samples(), high.samples());
    Ok(EmpiricalGradients {
        t: quad.grad(t),
        theta_low,
        theta_high,
    })
}

/// Applies a perturbation to the nominal samples of `inst`.
pub fn perturbed_env(inst: &ProblemInstance, theta: &PerturbationPair) -> Result<JointEnv> {
    let (low, high) = empirical_parts(inst.env())?;
    if theta.theta_low.shape() != low.samples().shape() || theta.theta_high.shape() != high.samples().shape() {
        return Err(Error::Dimension("perturbation shape differs from samples".into()));
    }
    Ok(JointEnv::Empirical {
        low: EmpiricalEnv::new(low.samples() + &theta.theta_low)?,
        high: EmpiricalEnv::new(high.samples() + &theta.theta_high)?,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmpiricalFit {
    pub map: AbstractionMap,
    pub perturbation: PerturbationPair,
    pub trace: FitTrace,
}

pub(crate) fn run_empirical(inst: &ProblemInstance, cfg: &SolverConfig, adversarial: bool) -> Result<EmpiricalFit> {
    cfg.validate()?;
    let (low, high) = empirical_parts(inst.env())?;
    let (u_l, u_h) = (low.samples(), high.samples());
    check_samples(inst, u_l, u_h)?;
    let n = u_l.nrows();
    let (bound_l, bound_h) = (cfg.eps_low * (n as f64).sqrt(), cfg.eps_high * (n as f64).sqrt());
    let mut t = inst.initial_t(cfg)?;
    let mut theta = PerturbationPair::zeros(n, u_l.ncols(), n, u_h.ncols());
    let pa = pair_affines(inst);
    let (h, l) = inst.t_shape();
    let mut quad = quadratic_from(&pa, &SampleMoments::new(u_l, u_h), l, h);
    let mut trace = FitTrace::default();
    let mut prev = quad.value(&t);
    check_finite_objective(prev, &trace)?;

    for _ in 0..cfg.max_outer {
        let lr = quad.step(cfg.lr_t);
        for _ in 0..cfg.k_min {
            let g = quad.grad(&t);
            t -= g * lr;
        }
        if adversarial {
            for _ in 0..cfg.k_max {
                let pl = u_l + &theta.theta_low;
                let ph = u_h + &theta.theta_high;
                let (gl, gh) = sample_grads_from(&t, &pa, &pl, &ph);
                // per-sample scaling: row i moves along its own gradient
                let scale = cfg.lr_env * n as f64;
                theta.theta_low = project_frobenius_ball(&(&theta.theta_low + gl * scale), bound_l);
                theta.theta_high = project_frobenius_ball(&(&theta.theta_high + gh * scale), bound_h);
            }
            let moments = SampleMoments::new(&(u_l + &theta.theta_low), &(u_h + &theta.theta_high));
            quad = quadratic_from(&pa, &moments, l, h);
        }
        let f = quad.value(&t);
        check_finite_objective(f, &trace)?;
        let (dl, dh) = theta.radii();
        trace.push(f, dl, dh);
        if (f - prev).abs() < cfg.tol {
            trace.converged = true;
            break;
        }
        prev = f;
    }
    Ok(EmpiricalFit {
        map: AbstractionMap::new(t).map_err(|_| Error::Diverged {
            trace: trace.objective.clone(),
        })?,
        perturbation: theta,
        trace,
    })
}

/// Alternating descent on `T` and projected ascent on the sample
/// perturbations inside `‖Θ_d‖_F ≤ ε_d √N`.
pub fn fit_diroca_empirical(inst: &ProblemInstance, cfg: &SolverConfig) -> Result<EmpiricalFit> {
    run_empirical(inst, cfg, true)
}
