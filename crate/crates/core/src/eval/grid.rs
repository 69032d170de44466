//! k-fold experiment driver: data generation, per-fold training and
//! scoring over the contamination and misspecification grids.

use std::io::Write;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::contamination::{contaminate, ContaminationSpec, NoiseKind};
use super::metrics::{abstraction_error_empirical, abstraction_error_gaussian, TestPair};
use super::misspec::{f_misspec_sample, omega_misspec, Nonlinearity};
use crate::datasets::DatasetBundle;
use crate::env::{EmpiricalEnv, GaussianEnv, JointEnv};
use crate::error::{config_err, Error, Result};
use crate::linalg::{mean_cov, Mat};
use crate::scm::InterventionMap;
use crate::solvers::{
    fit_abslin, fit_bary, fit_diroca_empirical, fit_diroca_gaussian, fit_grad, AbsLinVariant, AbstractionMap,
    FitTrace, ProblemInstance, SolverConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Gaussian,
    Empirical,
}

impl Setting {
    /// Solver settings used by the shipped experiments. The adversary step is
    /// larger in the empirical setting because each sample moves on its own.
    pub fn default_solver(self) -> SolverConfig {
        let lr_env = match self {
            Setting::Gaussian => 0.01,
            Setting::Empirical => 0.2,
        };
        SolverConfig {
            lr_env,
            ..SolverConfig::default()
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Setting::Gaussian => "gaussian",
            Setting::Empirical => "empirical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MethodKind {
    Grad,
    Bary,
    Diroca,
    Abslin {
        variant: AbsLinVariant,
        #[serde(default)]
        reg: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    #[serde(flatten)]
    pub kind: MethodKind,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl MethodSpec {
    pub fn new(kind: MethodKind, solver: SolverConfig) -> Self {
        Self { kind, solver }
    }

    pub fn diroca(solver: SolverConfig, eps_low: f64, eps_high: f64) -> Self {
        Self::new(MethodKind::Diroca, solver.with_radii(eps_low, eps_high))
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            MethodKind::Grad => "grad",
            MethodKind::Bary => "bary",
            MethodKind::Diroca => "diroca",
            MethodKind::Abslin { variant: AbsLinVariant::Perfect, .. } => "abslin",
            MethodKind::Abslin { variant: AbsLinVariant::Noisy, .. } => "abslin_noisy",
        }
    }

    /// Radii reported in results; zero for the non-robust methods.
    pub fn radii(&self) -> (f64, f64) {
        match self.kind {
            MethodKind::Diroca => (self.solver.eps_low, self.solver.eps_high),
            _ => (0.0, 0.0),
        }
    }
}

/// Endogenous samples per low-level and per high-level intervention, all
/// with the same row count.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentData {
    low: Vec<Mat>,
    high: Vec<Mat>,
}

impl ExperimentData {
    pub fn new(low: Vec<Mat>, high: Vec<Mat>) -> Result<Self> {
        let n = low.first().map(|m| m.nrows()).unwrap_or(0);
        if n == 0 || low.iter().chain(&high).any(|m| m.nrows() != n) {
            return Err(Error::Dimension(
                "every intervention needs the same nonzero number of samples".into(),
            ));
        }
        Ok(Self { low, high })
    }

    pub fn low(&self) -> &[Mat] {
        &self.low
    }

    pub fn high(&self) -> &[Mat] {
        &self.high
    }

    pub fn n_samples(&self) -> usize {
        self.low[0].nrows()
    }

    fn check(&self, bundle: &DatasetBundle) -> Result<()> {
        let o = &bundle.omega;
        if self.low.len() != o.low().len() || self.high.len() != o.high().len() {
            return Err(Error::Dimension(format!(
                "data covers {}/{} interventions, dataset has {}/{}",
                self.low.len(),
                self.high.len(),
                o.low().len(),
                o.high().len()
            )));
        }
        if self.low.iter().any(|m| m.ncols() != bundle.low.dim())
            || self.high.iter().any(|m| m.ncols() != bundle.high.dim())
        {
            return Err(Error::Dimension("sample columns do not match the models".into()));
        }
        Ok(())
    }
}

/// SHA-256 of length-prefixed parts, truncated to 64 bits.
pub fn derive_seed(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

fn le(v: u64) -> [u8; 8] {
    v.to_le_bytes()
}

/// Seed of one evaluation cell. The method is deliberately not part of the
/// key so that all methods are scored on the same contaminated test data.
pub fn cell_seed(root: u64, fold: usize, alpha_idx: usize, sigma_idx: usize, kind: &str, sample: usize) -> u64 {
    derive_seed(&[
        b"cell",
        &le(root),
        &le(fold as u64),
        &le(alpha_idx as u64),
        &le(sigma_idx as u64),
        kind.as_bytes(),
        &le(sample as u64),
    ])
}

/// Draws `n` endogenous samples for every intervention of both levels.
pub fn generate_data(bundle: &DatasetBundle, n: usize, root_seed: u64) -> Result<ExperimentData> {
    let draw = |level: &[u8], i: usize| derive_seed(&[b"data", level, &le(root_seed), &le(i as u64)]);
    let low = bundle
        .omega
        .low()
        .iter()
        .enumerate()
        .map(|(i, iota)| bundle.low.sample_endogenous(iota, &bundle.env_low, n, draw(b"low", i)))
        .collect::<Result<Vec<_>>>()?;
    let high = bundle
        .omega
        .high()
        .iter()
        .enumerate()
        .map(|(j, eta)| bundle.high.sample_endogenous(eta, &bundle.env_high, n, draw(b"high", j)))
        .collect::<Result<Vec<_>>>()?;
    ExperimentData::new(low, high)
}

/// Contiguous row ranges of `k` folds; the first `n mod k` folds get one extra row.
pub fn fold_ranges(n: usize, k: usize) -> Result<Vec<Range<usize>>> {
    if k < 2 {
        return Err(config_err("k", "need at least 2 folds"));
    }
    if n / k < 2 {
        return Err(Error::Eval(format!("{n} samples are too few for {k} folds")));
    }
    let (base, extra) = (n / k, n % k);
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        out.push(start..start + len);
        start += len;
    }
    Ok(out)
}

fn rows(x: &Mat, r: &Range<usize>) -> Mat {
    x.rows(r.start, r.len()).into_owned()
}

fn without_rows(x: &Mat, r: &Range<usize>) -> Mat {
    x.clone().remove_rows(r.start, r.len())
}

fn null_index(list: &[crate::scm::Intervention], level: &str) -> Result<usize> {
    list.iter()
        .position(|i| i.is_null())
        .ok_or_else(|| Error::Eval(format!("the {level}-level intervention set has no observational (null) entry")))
}

/// Nominal environment of a fold, abducted from the observational training
/// rows: Gaussian with fitted means and independent variances, or the raw
/// exogenous samples.
pub fn nominal_env(bundle: &DatasetBundle, data: &ExperimentData, setting: Setting, fold: &Range<usize>) -> Result<JointEnv> {
    let il = null_index(bundle.omega.low(), "low")?;
    let ih = null_index(bundle.omega.high(), "high")?;
    let ul = bundle.low.abduct(&without_rows(&data.low[il], fold))?;
    let uh = bundle.high.abduct(&without_rows(&data.high[ih], fold))?;
    Ok(match setting {
        Setting::Gaussian => {
            let fit = |u: &Mat| -> Result<GaussianEnv> {
                let (m, c) = mean_cov(u)?;
                let stds: Vec<f64> = (0..c.nrows()).map(|i| c[(i, i)].max(0.0).sqrt()).collect();
                GaussianEnv::diagonal(m, &stds)
            };
            JointEnv::Gaussian { low: fit(&ul)?, high: fit(&uh)? }
        }
        Setting::Empirical => JointEnv::Empirical {
            low: EmpiricalEnv::new(ul)?,
            high: EmpiricalEnv::new(uh)?,
        },
    })
}

/// Trained map of one method on one fold, under the true ω
/// (`omega_misalign == 0`) or a corrupted one.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedMap {
    pub method: String,
    pub eps_low: f64,
    pub eps_high: f64,
    pub fold: usize,
    pub omega_misalign: usize,
    pub seed: u64,
    pub map: AbstractionMap,
    pub trace: Option<FitTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FMisspec {
    pub fnl: Nonlinearity,
    pub strengths: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaMisspec {
    pub n_misalign: Vec<usize>,
    #[serde(default)]
    pub delta: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub alphas: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub noise_kinds: Vec<NoiseKind>,
    pub k: usize,
    pub m: usize,
    #[serde(default)]
    pub f_misspec: Option<FMisspec>,
    #[serde(default)]
    pub omega_misspec: Option<OmegaMisspec>,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.sigmas.is_empty() || self.noise_kinds.is_empty() {
            return Err(config_err("grid", "alpha, sigma and noise kind lists must be nonempty"));
        }
        if self.m == 0 {
            return Err(config_err("m", "need at least one sample per cell"));
        }
        if self.k < 2 {
            return Err(config_err("k", "need at least 2 folds"));
        }
        for &a in &self.alphas {
            if !(0.0..=1.0).contains(&a) {
                return Err(config_err("alphas", "must lie in [0, 1]"));
            }
        }
        if self.sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(config_err("sigmas", "must be finite and >= 0"));
        }
        for kind in &self.noise_kinds {
            kind.validate()?;
        }
        if let Some(f) = &self.f_misspec {
            if f.strengths.is_empty() {
                return Err(config_err("f_misspec.strengths", "must be nonempty"));
            }
        }
        if let Some(o) = &self.omega_misspec {
            if o.n_misalign.is_empty() {
                return Err(config_err("omega_misspec.n_misalign", "must be nonempty"));
            }
        }
        Ok(())
    }
}

fn run_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Eval(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn fit_one(
    bundle: &DatasetBundle,
    data: &ExperimentData,
    inst: &ProblemInstance,
    method: &MethodSpec,
    fold: &Range<usize>,
    seed: u64,
) -> Result<(AbstractionMap, Option<FitTrace>)> {
    let mut cfg = method.solver.clone();
    cfg.seed = seed;
    match method.kind {
        MethodKind::Grad => fit_grad(inst, &cfg).map(|(m, t)| (m, Some(t))),
        MethodKind::Bary => fit_bary(inst, &cfg).map(|m| (m, None)),
        MethodKind::Diroca => {
            if inst.env().is_gaussian() {
                fit_diroca_gaussian(inst, &cfg).map(|f| (f.map, Some(f.trace)))
            } else {
                fit_diroca_empirical(inst, &cfg).map(|f| (f.map, Some(f.trace)))
            }
        }
        MethodKind::Abslin { variant, reg } => {
            let il = null_index(bundle.omega.low(), "low")?;
            let ih = null_index(bundle.omega.high(), "high")?;
            let xl = without_rows(&data.low[il], fold);
            let xh = without_rows(&data.high[ih], fold);
            fit_abslin(&xl, &xh, variant, reg).map(|m| (m, None))
        }
    }
}

/// A fit that returned an error, with the task it belonged to.
#[derive(Debug)]
pub struct FitFailure {
    pub method: String,
    pub eps_low: f64,
    pub eps_high: f64,
    pub fold: usize,
    pub omega_misalign: usize,
    pub error: Error,
}

/// Fits every method on every fold, plus one refit per corrupted ω when the
/// grid asks for ω-misspecification. A failing fit does not stop the others.
pub fn train_each(
    bundle: &DatasetBundle,
    data: &ExperimentData,
    setting: Setting,
    methods: &[MethodSpec],
    grid: &GridSpec,
    root_seed: u64,
    jobs: usize,
) -> Result<Vec<std::result::Result<TrainedMap, FitFailure>>> {
    grid.validate()?;
    data.check(bundle)?;
    if methods.is_empty() {
        return Err(config_err("methods", "need at least one method"));
    }
    for m in methods {
        m.solver.validate()?;
    }
    let folds = fold_ranges(data.n_samples(), grid.k)?;
    let mut misalign = vec![0];
    if let Some(o) = &grid.omega_misspec {
        misalign.extend(o.n_misalign.iter().copied().filter(|&n| n > 0));
    }
    let delta = grid.omega_misspec.as_ref().map_or(0, |o| o.delta);
    let mut instances = Vec::new();
    for (f, fold) in folds.iter().enumerate() {
        let env = nominal_env(bundle, data, setting, fold)?;
        for &n in &misalign {
            let omega = if n == 0 {
                bundle.omega.clone()
            } else {
                omega_misspec(&bundle.omega, n, delta, omega_seed(root_seed, f, n))?
            };
            let inst = ProblemInstance::uniform(bundle.low.clone(), bundle.high.clone(), omega, env.clone())?;
            instances.push((f, n, inst));
        }
    }
    let tasks: Vec<(usize, usize)> = (0..instances.len())
        .flat_map(|i| (0..methods.len()).map(move |m| (i, m)))
        .collect();
    run_pool(jobs, || {
        tasks
            .par_iter()
            .map(|&(i, mi)| {
                let (f, n, inst) = &instances[i];
                let method = &methods[mi];
                let seed = derive_seed(&[b"fit", &le(root_seed), &le(*f as u64), &le(method.solver.seed)]);
                let (eps_low, eps_high) = method.radii();
                let (map, trace) = fit_one(bundle, data, inst, method, &folds[*f], seed).map_err(|error| FitFailure {
                    method: method.label().to_string(),
                    eps_low,
                    eps_high,
                    fold: *f,
                    omega_misalign: *n,
                    error,
                })?;
                Ok(TrainedMap {
                    method: method.label().to_string(),
                    eps_low,
                    eps_high,
                    fold: *f,
                    omega_misalign: *n,
                    seed,
                    map,
                    trace,
                })
            })
            .collect::<Vec<_>>()
    })
}

/// [`train_each`], failing on the first fit error.
pub fn train_all(
    bundle: &DatasetBundle,
    data: &ExperimentData,
    setting: Setting,
    methods: &[MethodSpec],
    grid: &GridSpec,
    root_seed: u64,
    jobs: usize,
) -> Result<Vec<TrainedMap>> {
    train_each(bundle, data, setting, methods, grid, root_seed, jobs)?
        .into_iter()
        .map(|r| r.map_err(|f| f.error))
        .collect()
}

fn omega_seed(root: u64, fold: usize, n: usize) -> u64 {
    derive_seed(&[b"omega", &le(root), &le(fold as u64), &le(n as u64)])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub method: String,
    pub eps_low: f64,
    pub eps_high: f64,
    pub fold: usize,
    pub alpha: f64,
    pub sigma: f64,
    pub noise_kind: String,
    pub seed: u64,
    pub error: f64,
}

fn score(setting: Setting, t: &Mat, pairs: &[TestPair], q: &[f64]) -> Result<f64> {
    let e = match setting {
        Setting::Gaussian => abstraction_error_gaussian(t, pairs, q)?,
        Setting::Empirical => abstraction_error_empirical(t, pairs, q)?,
    };
    if !(e.is_finite() && e >= 0.0) {
        return Err(Error::Eval(format!("non-finite abstraction error {e}")));
    }
    Ok(e)
}

struct Cell {
    fold: usize,
    alpha: f64,
    sigma: f64,
    kind: String,
    seed: u64,
    source: CellSource,
}

enum CellSource {
    Contaminated { alpha: f64, sigma: f64, noise: NoiseKind },
    Nonlinear { k: f64, fnl: Nonlinearity },
}

fn clean_pairs(data: &ExperimentData, omega: &InterventionMap, fold: &Range<usize>) -> Vec<TestPair> {
    omega
        .index_pairs()
        .map(|(i, j)| TestPair {
            x_low: rows(&data.low[i], fold),
            x_high: rows(&data.high[j], fold),
        })
        .collect()
}

fn cell_pairs(bundle: &DatasetBundle, data: &ExperimentData, fold: &Range<usize>, cell: &Cell) -> Result<Vec<TestPair>> {
    let sub = |level: &[u8], i: usize| derive_seed(&[level, &le(cell.seed), &le(i as u64)]);
    match cell.source {
        CellSource::Contaminated { alpha, sigma, noise } => bundle
            .omega
            .index_pairs()
            .enumerate()
            .map(|(p, (i, j))| {
                let spec = |seed| ContaminationSpec { alpha, sigma, noise, seed };
                Ok(TestPair {
                    x_low: contaminate(&rows(&data.low[i], fold), &spec(sub(b"low", p)))?,
                    x_high: contaminate(&rows(&data.high[j], fold), &spec(sub(b"high", p)))?,
                })
            })
            .collect(),
        CellSource::Nonlinear { k, fnl } => bundle
            .omega
            .pairs()
            .enumerate()
            .map(|(p, (iota, eta))| {
                Ok(TestPair {
                    x_low: f_misspec_sample(&bundle.low, k, fnl, &bundle.env_low, iota, fold.len(), sub(b"low", p))?,
                    x_high: f_misspec_sample(&bundle.high, k, fnl, &bundle.env_high, eta, fold.len(), sub(b"high", p))?,
                })
            })
            .collect(),
    }
}

/// Scores trained maps on every grid cell of their fold. Maps trained under
/// a corrupted ω are scored once on clean test data under the true ω.
pub fn score_all(
    bundle: &DatasetBundle,
    data: &ExperimentData,
    setting: Setting,
    maps: &[TrainedMap],
    grid: &GridSpec,
    root_seed: u64,
    jobs: usize,
) -> Result<Vec<ExperimentResult>> {
    grid.validate()?;
    data.check(bundle)?;
    let folds = fold_ranges(data.n_samples(), grid.k)?;
    if let Some(m) = maps.iter().find(|m| m.fold >= grid.k) {
        return Err(Error::Eval(format!("map for fold {} but only {} folds", m.fold, grid.k)));
    }
    let q = vec![1.0 / bundle.omega.len() as f64; bundle.omega.len()];

    let mut cells = Vec::new();
    for f in 0..grid.k {
        for (ai, &alpha) in grid.alphas.iter().enumerate() {
            for (si, &sigma) in grid.sigmas.iter().enumerate() {
                for &noise in &grid.noise_kinds {
                    let kind = noise.label();
                    for s in 0..grid.m {
                        cells.push(Cell {
                            fold: f,
                            alpha,
                            sigma,
                            seed: cell_seed(root_seed, f, ai, si, &kind, s),
                            kind: kind.clone(),
                            source: CellSource::Contaminated { alpha, sigma, noise },
                        });
                    }
                }
            }
        }
        if let Some(fm) = &grid.f_misspec {
            let kind = format!("fmisspec_{}", fm.fnl.label());
            for (ki, &k) in fm.strengths.iter().enumerate() {
                for s in 0..grid.m {
                    cells.push(Cell {
                        fold: f,
                        alpha: 0.0,
                        sigma: k,
                        seed: cell_seed(root_seed, f, 0, ki, &kind, s),
                        kind: kind.clone(),
                        source: CellSource::Nonlinear { k, fnl: fm.fnl },
                    });
                }
            }
        }
    }

    let per_cell = run_pool(jobs, || {
        cells
            .par_iter()
            .map(|cell| -> Result<Vec<ExperimentResult>> {
                let fold = &folds[cell.fold];
                let pairs = cell_pairs(bundle, data, fold, cell)?;
                maps.iter()
                    .filter(|m| m.fold == cell.fold && m.omega_misalign == 0)
                    .map(|m| {
                        Ok(ExperimentResult {
                            method: m.method.clone(),
                            eps_low: m.eps_low,
                            eps_high: m.eps_high,
                            fold: cell.fold,
                            alpha: cell.alpha,
                            sigma: cell.sigma,
                            noise_kind: cell.kind.clone(),
                            seed: cell.seed,
                            error: score(setting, m.map.matrix(), &pairs, &q)?,
                        })
                    })
                    .collect()
            })
            .collect::<Vec<_>>()
    })?;
    let mut out = Vec::new();
    for r in per_cell {
        out.extend(r?);
    }

    for (f, fold) in folds.iter().enumerate() {
        let misaligned: Vec<&TrainedMap> = maps.iter().filter(|m| m.fold == f && m.omega_misalign > 0).collect();
        if misaligned.is_empty() {
            continue;
        }
        let pairs = clean_pairs(data, &bundle.omega, fold);
        for m in misaligned {
            out.push(ExperimentResult {
                method: m.method.clone(),
                eps_low: m.eps_low,
                eps_high: m.eps_high,
                fold: f,
                alpha: 0.0,
                sigma: m.omega_misalign as f64,
                noise_kind: "omega_misalign".into(),
                seed: omega_seed(root_seed, f, m.omega_misalign),
                error: score(setting, m.map.matrix(), &pairs, &q)?,
            });
        }
    }
    Ok(out)
}

/// Data generation, training and scoring in one call.
#[allow(clippy::too_many_arguments)]
pub fn run_grid(
    bundle: &DatasetBundle,
    setting: Setting,
    methods: &[MethodSpec],
    grid: &GridSpec,
    n_samples: usize,
    root_seed: u64,
    jobs: usize,
) -> Result<Vec<ExperimentResult>> {
    let data = generate_data(bundle, n_samples, root_seed)?;
    let maps = train_all(bundle, &data, setting, methods, grid, root_seed, jobs)?;
    score_all(bundle, &data, setting, &maps, grid, root_seed, jobs)
}

pub const RESULTS_HEADER: &str = "method,eps_low,eps_high,fold,alpha,sigma,noise_kind,seed,error";

pub fn write_results_csv<W: Write>(w: W, results: &[ExperimentResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    if results.is_empty() {
        w.write_record(RESULTS_HEADER.split(','))?;
    }
    for r in results {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_csv<R: std::io::Read>(r: R) -> Result<Vec<ExperimentResult>> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != RESULTS_HEADER {
        return Err(Error::Eval(format!("unexpected results header `{}`", header.join(","))));
    }
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Mean and standard deviation of one (method, radii, α, σ, kind) cell over
/// folds and samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub method: String,
    pub eps_low: f64,
    pub eps_high: f64,
    pub alpha: f64,
    pub sigma: f64,
    pub noise_kind: String,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
}

/// Groups results in order of first appearance; `std` is the sample
/// standard deviation (0 for a single record).
pub fn summarize(results: &[ExperimentResult]) -> Vec<CellSummary> {
    let mut keys: Vec<(String, u64, u64, u64, u64, String)> = Vec::new();
    let mut groups: Vec<Vec<f64>> = Vec::new();
    for r in results {
        let key = (
            r.method.clone(),
            r.eps_low.to_bits(),
            r.eps_high.to_bits(),
            r.alpha.to_bits(),
            r.sigma.to_bits(),
            r.noise_kind.clone(),
        );
        match keys.iter().position(|k| *k == key) {
            Some(i) => groups[i].push(r.error),
            None => {
                keys.push(key);
                groups.push(vec![r.error]);
            }
        }
    }
    keys.into_iter()
        .zip(groups)
        .map(|((method, el, eh, a, s, kind), v)| {
            let n = v.len();
            let mean = v.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            CellSummary {
                method,
                eps_low: f64::from_bits(el),
                eps_high: f64::from_bits(eh),
                alpha: f64::from_bits(a),
                sigma: f64::from_bits(s),
                noise_kind: kind,
                count: n,
                mean,
                std,
            }
        })
        .collect()
}
