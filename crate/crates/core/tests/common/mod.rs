#![allow(dead_code)]

use std::time::Instant;

use diroca_core::datasets::DatasetBundle;
use diroca_core::env::{EmpiricalEnv, GaussianEnv, JointEnv};
use diroca_core::eval::{
    fold_ranges, generate_data, nominal_env, run_grid, summarize, write_results_csv, FMisspec, GridSpec, MethodKind,
    MethodSpec, Nonlinearity, NoiseKind, OmegaMisspec, Setting,
};
use diroca_core::geometry::{
    frobenius_prox, gaussian_w2_sq, gelbrich_distance_sq, joint_w2_sq, monge_map_gaussian,
    project_frobenius_ball, project_gelbrich_ball,
};
use diroca_core::linalg::{Mat, Vector};
use diroca_core::radius::{empirical_radii, gaussian_radii, ConcentrationConfig};
use diroca_core::scm::{Intervention, InterventionMap, LinearScm};
use diroca_core::solvers::empirical::empirical_gradients;
use diroca_core::solvers::gaussian::{gaussian_gradients, surrogate_factor_gradients};
use diroca_core::solvers::{
    empirical_objective, fit_diroca_empirical, fit_diroca_gaussian, fit_grad, gaussian_objective, gaussian_surrogate,
    ProblemInstance, SolverConfig, TInit,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub struct Check {
    pub name: String,
    pub pass: bool,
    pub details: Vec<String>,
}

impl Check {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            pass: true,
            details: Vec::new(),
        }
    }

    fn record(&mut self, ok: bool, detail: String) {
        self.pass &= ok;
        self.details.push(format!("{} {detail}", if ok { "ok  " } else { "FAIL" }));
    }

    pub fn report(&self) -> String {
        let mut s = format!("{} {}", if self.pass { "PASS" } else { "FAIL" }, self.name);
        for d in &self.details {
            s.push_str("\n    ");
            s.push_str(d);
        }
        s
    }

    pub fn assert(&self) {
        println!("{}", self.report());
        assert!(self.pass, "{}", self.report());
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss_mat(r: usize, c: usize, rng: &mut impl Rng) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

pub fn random_spd(d: usize, rng: &mut impl Rng) -> Mat {
    let a = gauss_mat(d, d, rng);
    &a * a.transpose() / d as f64 + Mat::identity(d, d) * 0.2
}

pub fn random_gaussian(d: usize, rng: &mut impl Rng) -> GaussianEnv {
    GaussianEnv::new(Vector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0)), random_spd(d, rng)).unwrap()
}

fn names(p: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{p}{i}")).collect()
}

/// A random DAG over `d` variables in index order.
pub fn random_scm(p: &str, d: usize, rng: &mut impl Rng) -> LinearScm {
    let mut edges = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            if rng.gen_bool(0.6) {
                edges.push((i, j, rng.gen_range(0.4..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }));
            }
        }
    }
    LinearScm::from_edges(names(p, d), &edges).unwrap()
}

/// Null plus single-variable interventions on both levels, with a random
/// surjective map.
pub fn random_omega(l: usize, h: usize, rng: &mut impl Rng) -> InterventionMap {
    let mut low = vec![Intervention::null()];
    let mut high = vec![Intervention::null()];
    for j in 0..h {
        high.push(Intervention::single(j, rng.gen_range(-1.0..1.0)));
    }
    let mut map = vec![0];
    for i in 0..l {
        low.push(Intervention::single(i, rng.gen_range(-1.0..1.0)));
        map.push(if i < h { i + 1 } else { rng.gen_range(1..=h) });
    }
    InterventionMap::new(low, high, map).unwrap()
}

fn random_q(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

pub fn random_instance(l: usize, h: usize, env: JointEnv, rng: &mut impl Rng) -> ProblemInstance {
    let low = random_scm("x", l, rng);
    let high = random_scm("y", h, rng);
    let omega = random_omega(l, h, rng);
    let q = random_q(omega.len(), rng);
    ProblemInstance::new(low, high, omega, env, q).unwrap()
}

fn rel_err(fd: &Mat, an: &Mat) -> f64 {
    (fd - an).norm() / an.norm().max(fd.norm()).max(1e-12)
}

fn fd_grad(x: &Mat, h: f64, mut f: impl FnMut(&Mat) -> f64) -> Mat {
    let mut g = Mat::zeros(x.nrows(), x.ncols());
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let mut p = x.clone();
            p[(i, j)] += h;
            let mut m = x.clone();
            m[(i, j)] -= h;
            g[(i, j)] = (f(&p) - f(&m)) / (2.0 * h);
        }
    }
    g
}

fn col(v: &Vector) -> Mat {
    Mat::from_column_slice(v.len(), 1, v.as_slice())
}

// ---------------------------------------------------------------- geometry

/// Transport cost of the closed-form Monge map estimated by sampling,
/// against the Gelbrich formula.
pub fn monge_monte_carlo(pairs: usize, n: usize) -> Check {
    let mut c = Check::new("Monge-map Monte-Carlo cost vs Gelbrich");
    let mut r = rng(101);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let a = random_gaussian(3, &mut r);
        let b = random_gaussian(3, &mut r);
        let (m, off) = monge_map_gaussian(&a, &b).unwrap();
        let x = a.sample(n, &mut r).unwrap();
        let y = &x * m.transpose() + Mat::from_fn(n, 3, |_, j| off[j]);
        let cost = (&y - &x).norm_squared() / n as f64;
        let exact = gaussian_w2_sq(&a, &b).unwrap();
        worst = worst.max((cost - exact).abs() / exact);
    }
    c.record(worst < 0.02, format!("{pairs} random 3-D pairs, {n} samples: max relative gap {worst:.4} (< 0.02)"));
    c
}

fn block_diag(a: &Mat, b: &Mat) -> Mat {
    let (p, q) = (a.nrows(), b.nrows());
    let mut m = Mat::zeros(p + q, p + q);
    m.view_mut((0, 0), (p, p)).copy_from(a);
    m.view_mut((p, p), (q, q)).copy_from(b);
    m
}

fn stack(a: &Vector, b: &Vector) -> Vector {
    Vector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).cloned())
}

/// Joint distance of product environments equals the sum over levels.
pub fn tensorization() -> Check {
    let mut c = Check::new("tensorization of the joint distance");
    let mut r = rng(102);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (l1, h1, l2, h2) = (
            random_gaussian(3, &mut r),
            random_gaussian(2, &mut r),
            random_gaussian(3, &mut r),
            random_gaussian(2, &mut r),
        );
        let joint = joint_w2_sq(
            &JointEnv::Gaussian {
                low: l1.clone(),
                high: h1.clone(),
            },
            &JointEnv::Gaussian {
                low: l2.clone(),
                high: h2.clone(),
            },
        )
        .unwrap();
        let direct = gelbrich_distance_sq(
            &stack(l1.mean(), h1.mean()),
            &block_diag(l1.cov(), h1.cov()),
            &stack(l2.mean(), h2.mean()),
            &block_diag(l2.cov(), h2.cov()),
        )
        .unwrap();
        worst = worst.max((joint - direct).abs());

        let (ul1, uh1) = (gauss_mat(9, 3, &mut r), gauss_mat(9, 2, &mut r));
        let (ul2, uh2) = (gauss_mat(9, 3, &mut r), gauss_mat(9, 2, &mut r));
        let emp = joint_w2_sq(
            &JointEnv::Empirical {
                low: EmpiricalEnv::new(ul1.clone()).unwrap(),
                high: EmpiricalEnv::new(uh1.clone()).unwrap(),
            },
            &JointEnv::Empirical {
                low: EmpiricalEnv::new(ul2.clone()).unwrap(),
                high: EmpiricalEnv::new(uh2.clone()).unwrap(),
            },
        )
        .unwrap();
        let mut d = 0.0;
        for i in 0..9 {
            let a: Vec<f64> = ul1.row(i).iter().chain(uh1.row(i).iter()).cloned().collect();
            let b: Vec<f64> = ul2.row(i).iter().chain(uh2.row(i).iter()).cloned().collect();
            d += a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        }
        worst = worst.max((emp - d / 9.0).abs());
    }
    c.record(worst < 1e-8, format!("50 Gaussian and 50 empirical pairs: max gap {worst:.2e} (< 1e-8)"));
    c
}

fn prox_value(x: &Mat, a: &Mat, lambda: f64) -> f64 {
    0.5 * (x - a).norm_squared() + lambda * x.norm()
}

fn random_in_ball(r: usize, c: usize, bound: f64, rng: &mut impl Rng) -> Mat {
    let d = gauss_mat(r, c, rng);
    let u: f64 = rng.gen_range(0.0..1.0);
    &d * (bound * u.powf(1.0 / (r * c) as f64) / d.norm())
}

/// Frobenius prox and projections against their defining optimization
/// problems, searched by random candidates.
pub fn prox_and_projections() -> Check {
    let mut c = Check::new("prox and projections vs brute force");
    let mut r = rng(103);
    let mut prox_ok = true;
    let mut proj_ok = true;
    for case in 0..40 {
        let a = gauss_mat(2, 3, &mut r) * r.gen_range(0.1..2.0);
        let lambda = r.gen_range(0.0..2.0);
        let p = frobenius_prox(&a, lambda);
        let fp = prox_value(&p, &a, lambda);
        for k in 0..2000 {
            let scale = 10f64.powi(-(k % 6));
            let cand = &p + gauss_mat(2, 3, &mut r) * scale;
            prox_ok &= prox_value(&cand, &a, lambda) >= fp - 1e-12;
        }
        prox_ok &= prox_value(&Mat::zeros(2, 3), &a, lambda) >= fp - 1e-12;

        let bound = if case % 5 == 0 { 0.0 } else { r.gen_range(0.1..2.0) };
        let pr = project_frobenius_ball(&a, bound);
        let dp = (&pr - &a).norm();
        proj_ok &= pr.norm() <= bound + 1e-12;
        for _ in 0..2000 {
            let cand = random_in_ball(2, 3, bound, &mut r);
            proj_ok &= (&cand - &a).norm() >= dp - 1e-12;
        }
    }
    c.record(prox_ok, "Frobenius prox minimizes ½‖X−A‖² + λ‖X‖_F over 80k random candidates".into());
    c.record(proj_ok, "Frobenius-ball projection is the closest feasible point over 80k candidates".into());

    // Gelbrich ball: the returned point is on the (μ, Σ^{1/2}) segment at
    // α = ε/W₂ when that point is feasible, otherwise the farthest feasible
    // point below α.
    let mut seg_ok = true;
    let mut worst_gap: f64 = 0.0;
    for _ in 0..30 {
        let center = random_gaussian(3, &mut r);
        let env = random_gaussian(3, &mut r);
        let dist = gaussian_w2_sq(&env, &center).unwrap().sqrt();
        let eps = dist * r.gen_range(0.05..0.95);
        let out = project_gelbrich_ball(&env, &center, eps).unwrap();
        let rc = sqrt_by_eig(center.cov());
        let re = sqrt_by_eig(env.cov());
        let at = |t: f64| {
            let m = center.mean() + (env.mean() - center.mean()) * t;
            let s = &rc + (&re - &rc) * t;
            GaussianEnv::new(m, &s * &s).unwrap()
        };
        let d_at = |t: f64| gaussian_w2_sq(&at(t), &center).unwrap().sqrt();
        let alpha = eps / dist;
        let t_best = if d_at(alpha) <= eps {
            alpha
        } else {
            (0..=20000)
                .map(|k| alpha * k as f64 / 20000.0)
                .filter(|&t| d_at(t) <= eps)
                .fold(0.0, f64::max)
        };
        let expect = at(t_best);
        let gap = (out.mean() - expect.mean()).amax().max((out.cov() - expect.cov()).amax());
        worst_gap = worst_gap.max(gap);
        seg_ok &= gaussian_w2_sq(&out, &center).unwrap().sqrt() <= eps + 1e-9;
    }
    seg_ok &= worst_gap < 1e-3;
    c.record(
        seg_ok,
        format!("Gelbrich-ball projection matches the segment definition on 30 cases (max gap {worst_gap:.1e})"),
    );
    c
}

fn sqrt_by_eig(m: &Mat) -> Mat {
    let e = nalgebra::SymmetricEigen::new(m.clone());
    let d = Mat::from_diagonal(&e.eigenvalues.map(|v| v.max(0.0).sqrt()));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

pub fn geometry_suite() -> Check {
    let t0 = Instant::now();
    let parts = [monge_monte_carlo(20, 100_000), tensorization(), prox_and_projections()];
    merge("geometry oracle suite", &parts, t0, 60.0)
}

fn merge(name: &str, parts: &[Check], t0: Instant, budget_s: f64) -> Check {
    let mut c = Check::new(name);
    for p in parts {
        for d in &p.details {
            c.details.push(format!("[{}] {d}", p.name));
        }
        c.pass &= p.pass;
    }
    let secs = t0.elapsed().as_secs_f64();
    c.record(secs < budget_s, format!("runtime {secs:.1}s (< {budget_s:.0}s)"));
    c
}

// --------------------------------------------------------------- gradients

fn gaussian_instance(rng: &mut impl Rng) -> ProblemInstance {
    let env = JointEnv::Gaussian {
        low: random_gaussian(3, rng),
        high: random_gaussian(2, rng),
    };
    random_instance(3, 2, env, rng)
}

fn empirical_instance(rng: &mut impl Rng) -> ProblemInstance {
    let n = 6;
    let env = JointEnv::Empirical {
        low: EmpiricalEnv::new(gauss_mat(n, 3, rng)).unwrap(),
        high: EmpiricalEnv::new(gauss_mat(n, 2, rng)).unwrap(),
    };
    random_instance(3, 2, env, rng)
}

fn with_gaussian(env: &JointEnv, ml: &Vector, mh: &Vector) -> JointEnv {
    let JointEnv::Gaussian { low, high } = env else { unreachable!() };
    JointEnv::Gaussian {
        low: GaussianEnv::new(ml.clone(), low.cov().clone()).unwrap(),
        high: GaussianEnv::new(mh.clone(), high.cov().clone()).unwrap(),
    }
}

/// Analytic gradients of every objective against central differences.
pub fn gradient_suite(instances: usize) -> Check {
    let t0 = Instant::now();
    let mut c = Check::new("gradient suite");
    let mut r = rng(104);
    let h = 1e-6;

    let (mut wt, mut wm) = (0.0f64, 0.0f64);
    for _ in 0..instances {
        let inst = gaussian_instance(&mut r);
        let env = inst.env().clone();
        let t = gauss_mat(2, 3, &mut r);
        let g = gaussian_gradients(&t, &env, &inst).unwrap();
        let fd_t = fd_grad(&t, h, |tt| gaussian_objective(tt, &env, &inst).unwrap());
        wt = wt.max(rel_err(&fd_t, &g.t));
        let JointEnv::Gaussian { low, high } = &env else { unreachable!() };
        let (ml, mh) = (col(low.mean()), col(high.mean()));
        let fd_l = fd_grad(&ml, h, |m| {
            gaussian_objective(&t, &with_gaussian(&env, &m.column(0).into(), high.mean()), &inst).unwrap()
        });
        let fd_h = fd_grad(&mh, h, |m| {
            gaussian_objective(&t, &with_gaussian(&env, low.mean(), &m.column(0).into()), &inst).unwrap()
        });
        wm = wm.max(rel_err(&fd_l, &col(&g.mu_low))).max(rel_err(&fd_h, &col(&g.mu_high)));
    }
    c.record(wt < 1e-4, format!("Gaussian objective wrt T: max rel err {wt:.2e}"));
    c.record(wm < 1e-4, format!("Gaussian objective wrt means: max rel err {wm:.2e}"));

    let mut ws = 0.0f64;
    for _ in 0..instances {
        let inst = gaussian_instance(&mut r);
        let JointEnv::Gaussian { low, high } = inst.env().clone() else { unreachable!() };
        let t = gauss_mat(2, 3, &mut r);
        let rl = gauss_mat(3, 3, &mut r);
        let rh = gauss_mat(2, 2, &mut r);
        let (gl, gh) = surrogate_factor_gradients(&t, low.mean(), &rl, high.mean(), &rh, &inst).unwrap();
        let f = |a: &Mat, b: &Mat| {
            let env = JointEnv::Gaussian {
                low: GaussianEnv::new(low.mean().clone(), a * a.transpose()).unwrap(),
                high: GaussianEnv::new(high.mean().clone(), b * b.transpose()).unwrap(),
            };
            gaussian_surrogate(&t, &env, &inst).unwrap()
        };
        let fd_l = fd_grad(&rl, h, |a| f(a, &rh));
        let fd_h = fd_grad(&rh, h, |b| f(&rl, b));
        ws = ws.max(rel_err(&fd_l, &gl)).max(rel_err(&fd_h, &gh));
    }
    c.record(ws < 1e-4, format!("Gaussian surrogate wrt covariance factors: max rel err {ws:.2e}"));

    let (mut et, mut eth) = (0.0f64, 0.0f64);
    for _ in 0..instances {
        let inst = empirical_instance(&mut r);
        let JointEnv::Empirical { low, high } = inst.env().clone() else { unreachable!() };
        let t = gauss_mat(2, 3, &mut r);
        let g = empirical_gradients(&t, inst.env(), &inst).unwrap();
        let fd_t = fd_grad(&t, h, |tt| empirical_objective(tt, inst.env(), &inst).unwrap());
        et = et.max(rel_err(&fd_t, &g.t));
        let f = |ul: &Mat, uh: &Mat| {
            let env = JointEnv::Empirical {
                low: EmpiricalEnv::new(ul.clone()).unwrap(),
                high: EmpiricalEnv::new(uh.clone()).unwrap(),
            };
            empirical_objective(&t, &env, &inst).unwrap()
        };
        let fd_l = fd_grad(low.samples(), h, |u| f(u, high.samples()));
        let fd_h = fd_grad(high.samples(), h, |u| f(low.samples(), u));
        eth = eth.max(rel_err(&fd_l, &g.theta_low)).max(rel_err(&fd_h, &g.theta_high));
    }
    c.record(et < 1e-4, format!("empirical objective wrt T: max rel err {et:.2e}"));
    c.record(eth < 1e-4, format!("empirical objective wrt sample perturbations: max rel err {eth:.2e}"));

    let secs = t0.elapsed().as_secs_f64();
    c.record(secs < 60.0, format!("{instances} instances per objective, runtime {secs:.1}s (< 60s)"));
    c
}

// ----------------------------------------------------------------- solvers

pub fn bundle_instance(name: &str, setting: Setting, n: usize, seed: u64) -> ProblemInstance {
    let b = DatasetBundle::builtin(name).unwrap();
    let data = generate_data(&b, n, seed).unwrap();
    let folds = fold_ranges(n, 5).unwrap();
    let env = nominal_env(&b, &data, setting, &folds[0]).unwrap();
    ProblemInstance::uniform(b.low.clone(), b.high.clone(), b.omega.clone(), env).unwrap()
}

fn objective(t: &Mat, inst: &ProblemInstance) -> f64 {
    if inst.env().is_gaussian() {
        gaussian_objective(t, inst.env(), inst).unwrap()
    } else {
        empirical_objective(t, inst.env(), inst).unwrap()
    }
}

fn diroca(inst: &ProblemInstance, cfg: &SolverConfig) -> diroca_core::Result<(Mat, diroca_core::solvers::FitTrace)> {
    if inst.env().is_gaussian() {
        fit_diroca_gaussian(inst, cfg).map(|f| (f.map.into_matrix(), f.trace))
    } else {
        fit_diroca_empirical(inst, cfg).map(|f| (f.map.into_matrix(), f.trace))
    }
}

/// DiRoCA with both radii at zero reproduces Grad.
pub fn zero_radius(seeds: &[u64], n: usize) -> Check {
    let mut c = Check::new("zero-radius equivalence");
    for name in ["slc", "lilucas"] {
        for setting in [Setting::Gaussian, Setting::Empirical] {
            let mut worst: f64 = 0.0;
            for &s in seeds {
                let inst = bundle_instance(name, setting, n, s);
                let cfg = SolverConfig {
                    seed: s,
                    ..setting.default_solver()
                };
                let (tg, _) = fit_grad(&inst, &cfg).unwrap();
                let (td, _) = diroca(&inst, &cfg.clone().with_radii(0.0, 0.0)).unwrap();
                worst = worst.max((objective(tg.matrix(), &inst) - objective(&td, &inst)).abs());
            }
            c.record(
                worst < 1e-6,
                format!("{name}/{}: max objective gap {worst:.2e} over seeds {seeds:?}", setting.label()),
            );
        }
    }
    c
}

/// Chain S→T→C abstracted to S→C by dropping the mediator, with the high
/// noise built so that `T* = [[1,0,0],[0,0,1]]` is exact for every paired
/// intervention.
pub fn consistent_instance(setting: Setting, seed: u64) -> (ProblemInstance, Mat) {
    let (a, b) = (1.3, 0.8);
    let low = LinearScm::from_edges(vec!["S".into(), "T".into(), "C".into()], &[(0, 1, a), (1, 2, b)]).unwrap();
    let high = LinearScm::from_edges(vec!["Sh".into(), "Ch".into()], &[(0, 1, a * b)]).unwrap();
    let iv = |t: Vec<usize>, v: Vec<f64>| Intervention::new(t, v).unwrap();
    let omega = InterventionMap::new(
        vec![iv(vec![], vec![]), iv(vec![0], vec![1.0]), iv(vec![2], vec![-0.5]), iv(vec![0, 2], vec![0.5, 1.0])],
        vec![iv(vec![], vec![]), iv(vec![0], vec![1.0]), iv(vec![1], vec![-0.5]), iv(vec![0, 1], vec![0.5, 1.0])],
        vec![0, 1, 2, 3],
    )
    .unwrap();
    let (mu, sd) = ([0.4, -0.2, 0.7], [0.9, 0.6, 0.8]);
    let env = match setting {
        Setting::Gaussian => {
            let lo = GaussianEnv::diagonal(Vector::from_row_slice(&mu), &sd).unwrap();
            let hi = GaussianEnv::diagonal(
                Vector::from_vec(vec![mu[0], b * mu[1] + mu[2]]),
                &[sd[0], (b * b * sd[1] * sd[1] + sd[2] * sd[2]).sqrt()],
            )
            .unwrap();
            JointEnv::Gaussian { low: lo, high: hi }
        }
        Setting::Empirical => {
            let mut r = rng(seed);
            let ul = Mat::from_fn(200, 3, |_, j| mu[j] + sd[j] * r.sample::<f64, _>(StandardNormal));
            let uh = Mat::from_fn(200, 2, |i, j| if j == 0 { ul[(i, 0)] } else { b * ul[(i, 1)] + ul[(i, 2)] });
            JointEnv::Empirical {
                low: EmpiricalEnv::new(ul).unwrap(),
                high: EmpiricalEnv::new(uh).unwrap(),
            }
        }
    };
    let t_star = Mat::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    (ProblemInstance::uniform(low, high, omega, env).unwrap(), t_star)
}

/// Exact-abstraction instances are learned to (near) zero objective from a
/// random start. DiRoCA runs at radius zero: with a positive radius the two
/// levels are shifted apart independently and the worst-case objective of
/// an exact instance is strictly positive.
pub fn consistent_recovery(seeds: &[u64]) -> Check {
    let mut c = Check::new("consistent-instance recovery");
    for setting in [Setting::Gaussian, Setting::Empirical] {
        let bound = if setting == Setting::Gaussian { 1e-4 } else { 1e-6 };
        let (mut wg, mut wd) = (0.0f64, 0.0f64);
        for &s in seeds {
            let (inst, t_star) = consistent_instance(setting, s);
            assert!(objective(&t_star, &inst) < 1e-12);
            let cfg = SolverConfig {
                t_init: TInit::Random,
                seed: s,
                lr_t: 0.5,
                max_outer: 20_000,
                tol: 1e-15,
                ..setting.default_solver()
            };
            let (tg, _) = fit_grad(&inst, &cfg).unwrap();
            let (td, _) = diroca(&inst, &cfg).unwrap();
            wg = wg.max(objective(tg.matrix(), &inst));
            wd = wd.max(objective(&td, &inst));
        }
        c.record(wg < bound, format!("{} Grad: max final objective {wg:.2e} (< {bound:.0e})", setting.label()));
        c.record(wd < bound, format!("{} DiRoCA: max final objective {wd:.2e} (< {bound:.0e})", setting.label()));
    }
    c
}

/// Every outer iterate of the worst-case environment stays inside its ball.
pub fn feasibility(runs: u64) -> Check {
    let mut c = Check::new("feasibility of worst-case environments");
    let radii = [(0.5, 0.3), (1.0, 1.0), (2.0, 2.0), (4.0, 0.5), (0.1, 3.0)];
    for setting in [Setting::Gaussian, Setting::Empirical] {
        let (mut excess, mut iters) = (f64::NEG_INFINITY, 0usize);
        for s in 0..runs {
            let (el, eh) = radii[s as usize % radii.len()];
            let inst = bundle_instance(if s % 2 == 0 { "slc" } else { "lilucas" }, setting, 1000, s);
            let cfg = SolverConfig {
                seed: s,
                ..setting.default_solver()
            }
            .with_radii(el, eh);
            if setting == Setting::Gaussian {
                let fit = fit_diroca_gaussian(&inst, &cfg).unwrap();
                let JointEnv::Gaussian { low, high } = &fit.worst_env else { unreachable!() };
                let JointEnv::Gaussian { low: nl, high: nh } = inst.env() else { unreachable!() };
                excess = excess.max(diag_gelbrich(low, nl) - el).max(diag_gelbrich(high, nh) - eh);
                for (dl, dh) in fit.trace.dist_low.iter().zip(&fit.trace.dist_high) {
                    excess = excess.max(dl - el).max(dh - eh);
                }
                iters += fit.trace.iterations();
            } else {
                let fit = fit_diroca_empirical(&inst, &cfg).unwrap();
                let n = fit.perturbation.theta_low.nrows() as f64;
                excess = excess
                    .max(fit.perturbation.theta_low.norm() / n.sqrt() - el)
                    .max(fit.perturbation.theta_high.norm() / n.sqrt() - eh);
                for (dl, dh) in fit.trace.dist_low.iter().zip(&fit.trace.dist_high) {
                    excess = excess.max(dl - el).max(dh - eh);
                }
                iters += fit.trace.iterations();
            }
        }
        c.record(
            excess <= 1e-6,
            format!(
                "{}: {runs} runs, {iters} outer iterations, max excess over radius {excess:.2e} (<= 1e-6)",
                setting.label()
            ),
        );
    }
    c
}

/// Gelbrich distance between diagonal Gaussians in closed form.
fn diag_gelbrich(a: &GaussianEnv, b: &GaussianEnv) -> f64 {
    let mut d = (a.mean() - b.mean()).norm_squared();
    for i in 0..a.dim() {
        d += (a.cov()[(i, i)].max(0.0).sqrt() - b.cov()[(i, i)].max(0.0).sqrt()).powi(2);
    }
    let off = a.cov().iter().enumerate().filter(|(k, _)| k % (a.dim() + 1) != 0).map(|(_, v)| v.abs()).fold(0.0, f64::max);
    assert!(off < 1e-12, "worst-case covariance is not diagonal");
    d.sqrt()
}

// ------------------------------------------------------------------ radius

/// The Gaussian radius at N = 500 covers the true 1-D environment.
pub fn radius_coverage(resamples: usize) -> Check {
    let mut c = Check::new("radius statistical coverage");
    let n = 500;
    let cfg = ConcentrationConfig {
        n_low: n,
        n_high: n,
        dim_low: 1,
        dim_high: 1,
        ..Default::default()
    };
    let eps = gaussian_radii(&cfg).unwrap().eps_low;
    let eta = cfg.eta_low;
    let truth = GaussianEnv::new(Vector::from_vec(vec![0.3]), Mat::from_element(1, 1, 1.44)).unwrap();
    let mut r = rng(105);
    let mut hits = 0;
    for _ in 0..resamples {
        let x = truth.sample(n, &mut r).unwrap();
        let fit = GaussianEnv::fit(&x).unwrap();
        if gaussian_w2_sq(&fit, &truth).unwrap().sqrt() <= eps {
            hits += 1;
        }
    }
    let rate = hits as f64 / resamples as f64;
    let need = 1.0 - eta - 0.05;
    c.record(
        rate >= need,
        format!("radius {eps:.4} at N={n}: coverage {rate:.3} over {resamples} resamples (>= {need:.3})"),
    );
    c
}

// ------------------------------------------------------------- experiments

fn method_means(res: &[diroca_core::eval::ExperimentResult], kind: &str, alpha: f64) -> Vec<(String, f64, f64)> {
    let cells: Vec<_> = res.iter().filter(|r| r.noise_kind == kind && r.alpha == alpha).cloned().collect();
    summarize(&cells).into_iter().map(|s| (s.method, s.eps_low, s.mean)).collect()
}

fn mean_of(cells: &[(String, f64, f64)], method: &str) -> f64 {
    cells.iter().find(|c| c.0 == method).map(|c| c.2).unwrap()
}

/// Error orderings under contamination on both datasets and settings.
pub fn contamination_orderings(seeds: &[u64], m: usize, jobs: usize) -> Check {
    let t0 = Instant::now();
    let mut c = Check::new("contamination orderings");
    let need = seeds.len() - seeds.len() / 5;
    for (name, sigma) in [("slc", 5.0), ("lilucas", 10.0)] {
        let bundle = DatasetBundle::builtin(name).unwrap();
        for setting in [Setting::Gaussian, Setting::Empirical] {
            let cfg = setting.default_solver();
            let methods = [
                MethodSpec::new(MethodKind::Grad, cfg.clone()),
                MethodSpec::diroca(cfg.clone(), 2.0, 2.0),
                MethodSpec::new(MethodKind::Bary, cfg.clone()),
            ];
            let grid = GridSpec {
                alphas: vec![0.0, 1.0],
                sigmas: vec![sigma],
                noise_kinds: vec![NoiseKind::Gaussian],
                k: 5,
                m,
                f_misspec: None,
                omega_misspec: None,
            };
            let mut wins = [0usize; 3];
            let mut rows = Vec::new();
            for &s in seeds {
                let res = run_grid(&bundle, setting, &methods, &grid, 10_000, s, jobs).unwrap();
                let a0 = method_means(&res, "gaussian", 0.0);
                let a1 = method_means(&res, "gaussian", 1.0);
                let (g0, d0) = (mean_of(&a0, "grad"), mean_of(&a0, "diroca"));
                let (g1, d1, b1) = (mean_of(&a1, "grad"), mean_of(&a1, "diroca"), mean_of(&a1, "bary"));
                wins[0] += (g0 <= d0) as usize;
                wins[1] += (d1 < g1) as usize;
                wins[2] += (d1 < b1) as usize;
                rows.push(format!("seed {s}: α0 grad {g0:.3} diroca {d0:.3} | α1 grad {g1:.3} diroca {d1:.3} bary {b1:.3}"));
            }
            let tag = format!("{name}/{} σ̃={sigma}", setting.label());
            for (w, what) in wins.iter().zip(["α=0: Grad ≤ DiRoCA(2,2)", "α=1: DiRoCA(2,2) < Grad", "α=1: DiRoCA(2,2) < Bary"]) {
                c.record(*w >= need, format!("{tag} {what}: {w}/{} seeds", seeds.len()));
            }
            for r in rows {
                c.details.push(format!("     {r}"));
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    c.details.push(format!("info runtime {secs:.0}s with {jobs} worker(s) (target < 900s)"));
    c
}

/// Radii from the concentration bounds at the per-fold training size.
pub fn default_radii(setting: Setting, n_train: usize, dims: (usize, usize)) -> (f64, f64) {
    let cfg = ConcentrationConfig {
        n_low: n_train,
        n_high: n_train,
        dim_low: dims.0,
        dim_high: dims.1,
        ..Default::default()
    };
    let r = match setting {
        Setting::Gaussian => gaussian_radii(&cfg).unwrap(),
        Setting::Empirical => empirical_radii(&cfg).unwrap(),
    };
    (r.eps_low, r.eps_high)
}

/// Best DiRoCA radius ≤ Grad ≤ Bary under sin (k = 1) and one ω misalignment
/// on LiLUCAS.
pub fn misspec(seeds: &[u64], m: usize, jobs: usize) -> Check {
    let mut c = Check::new("misspecification orderings");
    let need = seeds.len() - seeds.len() / 5;
    let bundle = DatasetBundle::builtin("lilucas").unwrap();
    let n = 10_000;
    for setting in [Setting::Gaussian, Setting::Empirical] {
        let cfg = setting.default_solver();
        let star = default_radii(setting, n - n / 5, (bundle.low.dim(), bundle.high.dim()));
        let mut methods = vec![
            MethodSpec::new(MethodKind::Grad, cfg.clone()),
            MethodSpec::new(MethodKind::Bary, cfg.clone()),
            MethodSpec::diroca(cfg.clone(), star.0, star.1),
        ];
        for r in [0.5, 1.0, 2.0, 4.0] {
            methods.push(MethodSpec::diroca(cfg.clone(), r, r));
        }
        let grid = GridSpec {
            alphas: vec![0.0],
            sigmas: vec![0.0],
            noise_kinds: vec![NoiseKind::Gaussian],
            k: 5,
            m,
            f_misspec: Some(FMisspec {
                fnl: Nonlinearity::Sin,
                strengths: vec![1.0],
            }),
            omega_misspec: Some(OmegaMisspec {
                n_misalign: vec![1],
                delta: 0,
            }),
        };
        let mut wins = [[0usize; 2]; 2];
        let mut rows = Vec::new();
        for &s in seeds {
            let res = run_grid(&bundle, setting, &methods, &grid, n, s, jobs).unwrap();
            for (k, kind) in ["fmisspec_sin", "omega_misalign"].iter().enumerate() {
                let cells = method_means(&res, kind, 0.0);
                let (g, b) = (mean_of(&cells, "grad"), mean_of(&cells, "bary"));
                let (best_eps, best) = cells
                    .iter()
                    .filter(|x| x.0 == "diroca")
                    .map(|x| (x.1, x.2))
                    .fold((f64::NAN, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
                wins[k][0] += (best <= g) as usize;
                wins[k][1] += (g <= b) as usize;
                rows.push(format!(
                    "seed {s} {kind}: best diroca {best:.4} (ε_ℓ={best_eps:.3}) grad {g:.4} bary {b:.4}"
                ));
            }
        }
        c.details.push(format!(
            "info {} radius grid: ε*=({:.3}, {:.3}), 0.5, 1, 2, 4",
            setting.label(),
            star.0,
            star.1
        ));
        for (k, kind) in ["sin k=1", "1 ω misalignment"].iter().enumerate() {
            let tag = format!("lilucas/{} {kind}", setting.label());
            c.record(wins[k][0] >= need, format!("{tag} best DiRoCA ≤ Grad: {}/{} seeds", wins[k][0], seeds.len()));
            c.record(wins[k][1] >= need, format!("{tag} Grad ≤ Bary: {}/{} seeds", wins[k][1], seeds.len()));
        }
        for r in rows {
            c.details.push(format!("     {r}"));
        }
    }
    c
}

/// The whole pipeline twice from one root seed, serially and on a pool,
/// must give byte-identical CSVs.
pub fn determinism(n: usize, m: usize) -> Check {
    let mut c = Check::new("end-to-end determinism");
    let bundle = DatasetBundle::builtin("slc").unwrap();
    for setting in [Setting::Gaussian, Setting::Empirical] {
        let cfg = SolverConfig {
            max_outer: 100,
            ..setting.default_solver()
        };
        let methods = [
            MethodSpec::new(MethodKind::Grad, cfg.clone()),
            MethodSpec::new(MethodKind::Bary, cfg.clone()),
            MethodSpec::diroca(cfg.clone(), 1.0, 0.5),
            MethodSpec::new(
                MethodKind::Abslin {
                    variant: diroca_core::solvers::AbsLinVariant::Noisy,
                    reg: 0.01,
                },
                cfg.clone(),
            ),
        ];
        let grid = GridSpec {
            alphas: vec![0.0, 0.5, 1.0],
            sigmas: vec![1.0, 5.0],
            noise_kinds: vec![NoiseKind::Gaussian, NoiseKind::StudentT { df: 3.0 }, NoiseKind::Exponential { rate: 1.0 }],
            k: 3,
            m,
            f_misspec: Some(FMisspec {
                fnl: Nonlinearity::Tanh,
                strengths: vec![0.5, 1.0],
            }),
            omega_misspec: Some(OmegaMisspec {
                n_misalign: vec![1, 2],
                delta: 0,
            }),
        };
        let csv = |jobs: usize| {
            let res = run_grid(&bundle, setting, &methods, &grid, n, 7, jobs).unwrap();
            let mut buf = Vec::new();
            write_results_csv(&mut buf, &res).unwrap();
            buf
        };
        let a = csv(1);
        let b = csv(4);
        let rows = a.iter().filter(|&&ch| ch == b'\n').count() - 1;
        c.record(a == b, format!("{}: {rows} rows, serial vs 4 workers byte-identical", setting.label()));
    }
    c
}
