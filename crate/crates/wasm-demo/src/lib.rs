//! Browser bindings for three small demos. Every export takes plain numbers
//! or a JSON string and returns a JSON string; the `*_json` functions hold
//! the logic so they can be tested natively.

use diroca_core::datasets::DatasetBundle;
use diroca_core::env::GaussianEnv;
use diroca_core::eval::{
    abstraction_error_empirical, abstraction_error_gaussian, contaminate, fold_ranges, generate_data, nominal_env,
    ContaminationSpec, NoiseKind, Setting, TestPair,
};
use diroca_core::geometry::{gaussian_w2_sq, project_gelbrich_ball};
use diroca_core::linalg::{Mat, Vector};
use diroca_core::radius::{empirical_radii, eta_from_delta, gaussian_radii, ConcentrationConfig};
use diroca_core::solvers::{fit_diroca_empirical, fit_diroca_gaussian, fit_grad, ProblemInstance};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn to_js(r: Result<Value, String>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

fn err(e: impl ToString) -> String {
    e.to_string()
}

/// Radii for `points` log-spaced sample sizes in `[n_min, n_max]`.
pub fn radius_curves_json(n_min: usize, n_max: usize, points: usize, dim_low: usize, dim_high: usize, delta: f64) -> Result<Value, String> {
    if n_min == 0 || n_max < n_min || points < 2 {
        return Err("need 1 <= n_min <= n_max and at least 2 points".into());
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err("delta must lie in (0, 1)".into());
    }
    let eta = eta_from_delta(delta);
    let (lo, hi) = ((n_min as f64).ln(), (n_max as f64).ln());
    let mut ns: Vec<usize> = (0..points)
        .map(|i| (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp().round() as usize)
        .collect();
    ns.dedup();
    let mut g = (Vec::new(), Vec::new(), Vec::new());
    let mut e = (Vec::new(), Vec::new(), Vec::new());
    for &n in &ns {
        let cc = ConcentrationConfig {
            n_low: n,
            n_high: n,
            eta_low: eta,
            eta_high: eta,
            dim_low,
            dim_high,
            ..Default::default()
        };
        let rg = gaussian_radii(&cc).map_err(err)?;
        let re = empirical_radii(&cc).map_err(err)?;
        g.0.push(rg.eps_low);
        g.1.push(rg.eps_high);
        g.2.push(rg.eps_joint);
        e.0.push(re.eps_low);
        e.1.push(re.eps_high);
        e.2.push(re.eps_joint);
    }
    Ok(json!({
        "n": ns,
        "gaussian": {"eps_low": g.0, "eps_high": g.1, "eps_joint": g.2},
        "empirical": {"eps_low": e.0, "eps_high": e.1, "eps_joint": e.2},
    }))
}

#[wasm_bindgen]
pub fn radius_curves(n_min: usize, n_max: usize, points: usize, dim_low: usize, dim_high: usize, delta: f64) -> Result<String, JsError> {
    to_js(radius_curves_json(n_min, n_max, points, dim_low, dim_high, delta))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Gauss2 {
    pub mean: [f64; 2],
    /// Row-major 2×2 covariance.
    pub cov: [f64; 4],
}

impl Gauss2 {
    fn env(&self) -> Result<GaussianEnv, String> {
        GaussianEnv::new(Vector::from_row_slice(&self.mean), Mat::from_row_slice(2, 2, &self.cov)).map_err(err)
    }

    fn from_env(g: &GaussianEnv) -> Self {
        let c = g.cov();
        Self {
            mean: [g.mean()[0], g.mean()[1]],
            cov: [c[(0, 0)], c[(0, 1)], c[(1, 0)], c[(1, 1)]],
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct ProjectionRequest {
    pub point: Gauss2,
    pub center: Gauss2,
    pub eps: f64,
}

/// Projects a 2-D Gaussian onto the Gelbrich ball around `center`.
pub fn project_json(request: &str) -> Result<Value, String> {
    let req: ProjectionRequest = serde_json::from_str(request).map_err(err)?;
    let point = req.point.env()?;
    let center = req.center.env()?;
    let proj = project_gelbrich_ball(&point, &center, req.eps).map_err(err)?;
    let before = gaussian_w2_sq(&point, &center).map_err(err)?.max(0.0).sqrt();
    let after = gaussian_w2_sq(&proj, &center).map_err(err)?.max(0.0).sqrt();
    Ok(json!({
        "projected": Gauss2::from_env(&proj),
        "distance_before": before,
        "distance_after": after,
        "inside": before <= req.eps,
    }))
}

#[wasm_bindgen]
pub fn project_gelbrich(request: &str) -> Result<String, JsError> {
    to_js(project_json(request))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct FitRequest {
    pub setting: Setting,
    pub eps: f64,
    /// Samples per intervention; half train, half test.
    pub n: usize,
    pub sigma: f64,
    pub alphas: Vec<f64>,
    pub seed: u64,
    pub max_outer: usize,
}

impl Default for FitRequest {
    fn default() -> Self {
        Self {
            setting: Setting::Gaussian,
            eps: 2.0,
            n: 1000,
            sigma: 5.0,
            alphas: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            seed: 0,
            max_outer: 300,
        }
    }
}

fn score(setting: Setting, t: &Mat, pairs: &[TestPair], q: &[f64]) -> Result<f64, String> {
    match setting {
        Setting::Gaussian => abstraction_error_gaussian(t, pairs, q),
        Setting::Empirical => abstraction_error_empirical(t, pairs, q),
    }
    .map_err(err)
}

/// Fits Grad and DiRoCA on half of a fresh SLC sample and scores both on
/// the other half under increasing contamination.
pub fn slc_fit_json(request: &str) -> Result<Value, String> {
    let req: FitRequest = serde_json::from_str(request).map_err(err)?;
    if req.n < 20 || req.n > 20_000 {
        return Err("n must lie in [20, 20000]".into());
    }
    let bundle = DatasetBundle::builtin("slc").map_err(err)?;
    let data = generate_data(&bundle, req.n, req.seed).map_err(err)?;
    let folds = fold_ranges(req.n, 2).map_err(err)?;
    let test = &folds[1];
    let env = nominal_env(&bundle, &data, req.setting, test).map_err(err)?;
    let inst = ProblemInstance::uniform(bundle.low.clone(), bundle.high.clone(), bundle.omega.clone(), env).map_err(err)?;

    let mut cfg = req.setting.default_solver();
    cfg.max_outer = req.max_outer;
    cfg.seed = req.seed;
    let (grad_map, grad_trace) = fit_grad(&inst, &cfg).map_err(err)?;
    let rcfg = cfg.clone().with_radii(req.eps, req.eps);
    let (rob_map, rob_trace) = match req.setting {
        Setting::Gaussian => fit_diroca_gaussian(&inst, &rcfg).map(|f| (f.map, f.trace)),
        Setting::Empirical => fit_diroca_empirical(&inst, &rcfg).map(|f| (f.map, f.trace)),
    }
    .map_err(err)?;

    let q = vec![1.0 / bundle.omega.len() as f64; bundle.omega.len()];
    let mut errors = (Vec::new(), Vec::new());
    for (ai, &alpha) in req.alphas.iter().enumerate() {
        let pairs = bundle
            .omega
            .index_pairs()
            .enumerate()
            .map(|(p, (i, j))| {
                let spec = |level: u64| ContaminationSpec {
                    alpha,
                    sigma: req.sigma,
                    noise: NoiseKind::Gaussian,
                    seed: req.seed ^ ((ai as u64) << 32) ^ ((p as u64) << 8) ^ level,
                };
                let rows = |m: &Mat| m.rows(test.start, test.len()).into_owned();
                Ok(TestPair {
                    x_low: contaminate(&rows(&data.low()[i]), &spec(1)).map_err(err)?,
                    x_high: contaminate(&rows(&data.high()[j]), &spec(2)).map_err(err)?,
                })
            })
            .collect::<Result<Vec<_>, String>>()?;
        errors.0.push(score(req.setting, grad_map.matrix(), &pairs, &q)?);
        errors.1.push(score(req.setting, rob_map.matrix(), &pairs, &q)?);
    }
    let rows = |t: &Mat| -> Vec<Vec<f64>> { t.row_iter().map(|r| r.iter().copied().collect()).collect() };
    Ok(json!({
        "alphas": req.alphas,
        "grad": {"t": rows(grad_map.matrix()), "objective": grad_trace.objective, "error": errors.0},
        "diroca": {"t": rows(rob_map.matrix()), "objective": rob_trace.objective, "error": errors.1,
                   "dist_low": rob_trace.dist_low, "dist_high": rob_trace.dist_high},
    }))
}

#[wasm_bindgen]
pub fn slc_fit(request: &str) -> Result<String, JsError> {
    to_js(slc_fit_json(request))
}
