//! `radius`, `train` and `eval`.

use std::fs;
use std::path::{Path, PathBuf};

use diroca_core::eval::{score_all, summarize, train_each, write_results_csv, TrainedMap};
use diroca_core::io::{read_json, write_json, MapFile, MapMetadata};
use diroca_core::radius::{empirical_radii, gaussian_radii, ConcentrationConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::LoadedConfig;
use crate::dataset::{load_data, DEFAULT_SAMPLES};
use crate::error::{CliError, CliResult};
use crate::RunArgs;

pub struct RunOptions {
    pub cfg: LoadedConfig,
    pub run_id: Option<String>,
    pub jobs: usize,
    pub seed: u64,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
}

impl RunOptions {
    pub(crate) fn from_args(a: RunArgs) -> CliResult<Self> {
        if a.jobs == 0 {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        if let Some(id) = &a.run_id {
            if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." {
                return Err(CliError::usage(format!("invalid run id `{id}`")));
            }
        }
        let cfg = LoadedConfig::load(&a.config)?;
        Ok(Self {
            seed: a.seed.unwrap_or(cfg.run.root_seed),
            data_dir: a.data_dir.unwrap_or_else(|| cfg.resolve(&cfg.run.io.data_dir)),
            out_dir: a.out_dir.unwrap_or_else(|| cfg.resolve(&cfg.run.io.output_dir)),
            run_id: a.run_id,
            jobs: a.jobs,
            cfg,
        })
    }
}

fn write_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::config(format!("cannot write {}: {e}", path.display()))
}

fn radii_json(cc: &ConcentrationConfig) -> CliResult<serde_json::Value> {
    Ok(json!({
        "gaussian": gaussian_radii(cc)?,
        "empirical": empirical_radii(cc)?,
    }))
}

pub fn cmd_radius(config: Option<&Path>) -> CliResult<()> {
    let cc = match config {
        Some(p) => {
            let cfg = LoadedConfig::load(p)?;
            let bundle = cfg.bundle()?;
            let n = DEFAULT_SAMPLES - DEFAULT_SAMPLES / cfg.run.grid.k;
            cfg.concentration(n, (bundle.low.dim(), bundle.high.dim()))
        }
        None => ConcentrationConfig::default(),
    };
    let out = radii_json(&cc)?;
    println!("{}", serde_json::to_string_pretty(&out).expect("radii serialize"));
    Ok(())
}

pub const RUN_MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    /// Stopped at `max_outer` before reaching the tolerance.
    NotConverged,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitRecord {
    pub method: String,
    pub eps_low: f64,
    pub eps_high: f64,
    pub fold: usize,
    pub omega_misalign: usize,
    pub status: FitStatus,
    pub file: Option<String>,
    pub iterations: Option<usize>,
    pub final_objective: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub dataset: String,
    pub dataset_hash: String,
    pub setting: diroca_core::eval::Setting,
    pub root_seed: u64,
    pub n_samples: usize,
    pub k: usize,
    pub fits: Vec<FitRecord>,
}

fn map_file_name(method: &str, eps_low: f64, eps_high: f64, fold: usize, misalign: usize) -> String {
    let mut s = format!("{method}_{eps_low}_{eps_high}_f{fold}");
    if misalign > 0 {
        s.push_str(&format!("_w{misalign}"));
    }
    s.push_str(".json");
    s
}

fn write_traces(path: &Path, maps: &[TrainedMap]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| write_err(path, e))?;
    let mut rec = |row: &[String]| w.write_record(row).map_err(|e| write_err(path, e));
    rec(&[
        "method", "eps_low", "eps_high", "fold", "omega_misalign", "iteration", "objective", "dist_low", "dist_high",
    ]
    .map(String::from))?;
    for m in maps {
        let Some(t) = &m.trace else { continue };
        for i in 0..t.iterations() {
            rec(&[
                m.method.clone(),
                m.eps_low.to_string(),
                m.eps_high.to_string(),
                m.fold.to_string(),
                m.omega_misalign.to_string(),
                (i + 1).to_string(),
                t.objective[i].to_string(),
                t.dist_low[i].to_string(),
                t.dist_high[i].to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| write_err(path, e))
}

pub fn cmd_train(o: &RunOptions) -> CliResult<()> {
    let cfg = &o.cfg;
    let bundle = cfg.bundle()?;
    let (dm, data) = load_data(&o.data_dir, &bundle)?;
    let grid = cfg.grid();
    let n_train = dm.n - dm.n / grid.k;
    let methods = cfg.methods(n_train, (bundle.low.dim(), bundle.high.dim()))?;

    let run_id = o
        .run_id
        .clone()
        .unwrap_or_else(|| chrono::Local::now().format("%Y%m%d-%H%M%S").to_string());
    let dir = o.out_dir.join(&run_id);
    if dir.exists() {
        return Err(CliError::config(format!("run directory {} already exists", dir.display())));
    }
    fs::create_dir_all(dir.join("maps")).map_err(|e| write_err(&dir, e))?;
    let cp = dir.join("config.json");
    fs::write(&cp, &cfg.raw).map_err(|e| write_err(&cp, e))?;

    let outcomes = train_each(&bundle, &data, cfg.run.setting, &methods, &grid, o.seed, o.jobs)?;
    let mut fits = Vec::new();
    let mut ok_maps = Vec::new();
    for r in outcomes {
        match r {
            Ok(m) => {
                let file = map_file_name(&m.method, m.eps_low, m.eps_high, m.fold, m.omega_misalign);
                let meta = MapMetadata {
                    method: m.method.clone(),
                    eps_low: m.eps_low,
                    eps_high: m.eps_high,
                    seed: m.seed,
                    fold: m.fold,
                    omega_misalign: m.omega_misalign,
                    dataset_hash: dm.dataset_hash.clone(),
                };
                let p = dir.join("maps").join(&file);
                write_json(&p, &MapFile::new(&m.map, meta)).map_err(|e| write_err(&p, e))?;
                let converged = m.trace.as_ref().is_none_or(|t| t.converged);
                fits.push(FitRecord {
                    method: m.method.clone(),
                    eps_low: m.eps_low,
                    eps_high: m.eps_high,
                    fold: m.fold,
                    omega_misalign: m.omega_misalign,
                    status: if converged { FitStatus::Converged } else { FitStatus::NotConverged },
                    file: Some(file),
                    iterations: m.trace.as_ref().map(|t| t.iterations()),
                    final_objective: m.trace.as_ref().and_then(|t| t.last_objective()),
                    error: None,
                });
                ok_maps.push(m);
            }
            Err(f) => fits.push(FitRecord {
                method: f.method,
                eps_low: f.eps_low,
                eps_high: f.eps_high,
                fold: f.fold,
                omega_misalign: f.omega_misalign,
                status: FitStatus::Failed,
                file: None,
                iterations: None,
                final_objective: None,
                error: Some(f.error.to_string()),
            }),
        }
    }
    write_traces(&dir.join("traces.csv"), &ok_maps)?;
    let manifest = RunManifest {
        dataset: bundle.name().to_string(),
        dataset_hash: dm.dataset_hash,
        setting: cfg.run.setting,
        root_seed: o.seed,
        n_samples: dm.n,
        k: grid.k,
        fits,
    };
    let mp = dir.join(RUN_MANIFEST);
    write_json(&mp, &manifest).map_err(|e| write_err(&mp, e))?;

    let failed = manifest.fits.iter().filter(|f| f.status == FitStatus::Failed).count();
    let unconverged = manifest.fits.iter().filter(|f| f.status == FitStatus::NotConverged).count();
    println!(
        "{}: {} fits, {failed} failed, {unconverged} stopped at max_outer",
        dir.display(),
        manifest.fits.len()
    );
    if failed + unconverged > 0 {
        return Err(CliError::solver(format!(
            "{failed} fit(s) failed and {unconverged} did not converge; see {}",
            mp.display()
        )));
    }
    Ok(())
}

/// The named run, or the lexicographically last one (timestamps sort).
fn find_run(out_dir: &Path, run_id: Option<&str>) -> CliResult<PathBuf> {
    if let Some(id) = run_id {
        let d = out_dir.join(id);
        if !d.join(RUN_MANIFEST).is_file() {
            return Err(CliError::missing(format!("no trained run at {}", d.display())));
        }
        return Ok(d);
    }
    let mut runs: Vec<PathBuf> = fs::read_dir(out_dir)
        .map_err(|e| CliError::artifact(out_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(RUN_MANIFEST).is_file())
        .collect();
    runs.sort();
    runs.pop()
        .ok_or_else(|| CliError::missing(format!("no trained runs in {}", out_dir.display())))
}

pub fn cmd_eval(o: &RunOptions) -> CliResult<()> {
    let cfg = &o.cfg;
    let bundle = cfg.bundle()?;
    let dir = find_run(&o.out_dir, o.run_id.as_deref())?;
    let mp = dir.join(RUN_MANIFEST);
    let manifest: RunManifest = read_json(&mp).map_err(|e| CliError::artifact(&mp, e))?;
    let (dm, data) = load_data(&o.data_dir, &bundle)?;
    if manifest.dataset_hash != dm.dataset_hash || manifest.n_samples != dm.n {
        return Err(CliError::missing(format!(
            "run {} was trained on different data than {}",
            dir.display(),
            o.data_dir.display()
        )));
    }
    let grid = cfg.grid();
    if grid.k != manifest.k {
        return Err(CliError::config(format!("config has k = {} but the run used k = {}", grid.k, manifest.k)));
    }

    let mut maps = Vec::new();
    let mut missing = Vec::new();
    for f in &manifest.fits {
        let Some(file) = &f.file else {
            missing.push(format!("{} ({}, {}) fold {}", f.method, f.eps_low, f.eps_high, f.fold));
            continue;
        };
        let p = dir.join("maps").join(file);
        let mf: MapFile = match read_json(&p) {
            Ok(m) => m,
            Err(_) => {
                missing.push(p.display().to_string());
                continue;
            }
        };
        let meta = mf.metadata.clone();
        maps.push(TrainedMap {
            method: meta.method,
            eps_low: meta.eps_low,
            eps_high: meta.eps_high,
            fold: meta.fold,
            omega_misalign: meta.omega_misalign,
            seed: meta.seed,
            map: mf.to_map().map_err(|e| CliError::artifact(&p, e))?,
            trace: None,
        });
    }
    if !missing.is_empty() {
        return Err(CliError::missing(format!("missing trained maps: {}", missing.join(", "))));
    }
    let results = score_all(&bundle, &data, manifest.setting, &maps, &grid, manifest.root_seed, o.jobs)?;

    let rp = dir.join("results.csv");
    let f = fs::File::create(&rp).map_err(|e| write_err(&rp, e))?;
    write_results_csv(f, &results).map_err(|e| write_err(&rp, e))?;
    let sp = dir.join("summary.json");
    write_json(&sp, &summarize(&results)).map_err(|e| write_err(&sp, e))?;
    println!("{}: {} results", rp.display(), results.len());
    Ok(())
}
