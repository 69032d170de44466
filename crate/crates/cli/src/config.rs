//! The JSON run configuration shared by `train`, `eval` and `radius`.

use std::path::{Path, PathBuf};

use diroca_core::datasets::{DatasetBundle, BUILTIN};
use diroca_core::eval::{FMisspec, GridSpec, MethodKind, MethodSpec, NoiseKind, OmegaMisspec, Setting};
use diroca_core::radius::{empirical_radii, gaussian_radii, ConcentrationConfig};
use diroca_core::solvers::SolverConfig;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetRef {
    Builtin(String),
    File { path: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodEntry {
    #[serde(flatten)]
    pub kind: MethodKind,
    /// Fields overriding the setting's default solver for this method only.
    #[serde(default)]
    pub solver: Map<String, Value>,
}

/// A radius pair, or `"concentration"` for the bound-derived radii.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RadiusEntry {
    Pair([f64; 2]),
    Named(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub alphas: Vec<f64>,
    pub sigmas: Vec<f64>,
    #[serde(default = "default_noise")]
    pub noise_kinds: Vec<NoiseKind>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_m")]
    pub m: usize,
}

fn default_noise() -> Vec<NoiseKind> {
    vec![NoiseKind::Gaussian]
}

fn default_k() -> usize {
    5
}

fn default_m() -> usize {
    10
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MisspecConfig {
    #[serde(default)]
    pub f: Option<FMisspec>,
    #[serde(default)]
    pub omega: Option<OmegaMisspec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoConfig {
    pub data_dir: PathBuf,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetRef,
    pub setting: Setting,
    pub methods: Vec<MethodEntry>,
    #[serde(default)]
    pub solver: Map<String, Value>,
    #[serde(default)]
    pub radii: Vec<RadiusEntry>,
    /// Bound constants, used as given. When absent, the defaults with the
    /// per-fold training size and the dataset's dimensions.
    #[serde(default)]
    pub concentration: Option<ConcentrationConfig>,
    pub grid: GridConfig,
    #[serde(default)]
    pub misspec: MisspecConfig,
    pub io: IoConfig,
    #[serde(default)]
    pub root_seed: u64,
}

/// A parsed config plus its raw text and the directory relative paths
/// resolve against.
pub struct LoadedConfig {
    pub run: RunConfig,
    pub raw: String,
    pub base: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let run: RunConfig = serde_json::from_str(&raw)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let cfg = Self { run, raw, base };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn validate(&self) -> CliResult<()> {
        let r = &self.run;
        let g = &r.grid;
        if g.alphas.is_empty() || g.sigmas.is_empty() || g.noise_kinds.is_empty() {
            return Err(CliError::usage("grid alphas, sigmas and noise_kinds must be nonempty"));
        }
        if r.methods.is_empty() {
            return Err(CliError::config("`methods` must list at least one method"));
        }
        if let DatasetRef::File { path } = &r.dataset {
            let p = self.resolve(path);
            if !p.is_file() {
                return Err(CliError::config(format!("dataset file {} does not exist", p.display())));
            }
        }
        let has_diroca = r.methods.iter().any(|m| m.kind == MethodKind::Diroca);
        if has_diroca && r.radii.is_empty() {
            return Err(CliError::config("`radii` must be nonempty when diroca is listed"));
        }
        for e in &r.radii {
            if let RadiusEntry::Named(n) = e {
                if n != "concentration" {
                    return Err(CliError::config(format!(
                        "radius entry `{n}`: expected a [low, high] pair or \"concentration\""
                    )));
                }
            }
        }
        self.grid().validate()?;
        Ok(())
    }

    pub fn bundle(&self) -> CliResult<DatasetBundle> {
        load_dataset(&self.run.dataset, &self.base)
    }

    pub fn grid(&self) -> GridSpec {
        let g = &self.run.grid;
        GridSpec {
            alphas: g.alphas.clone(),
            sigmas: g.sigmas.clone(),
            noise_kinds: g.noise_kinds.clone(),
            k: g.k,
            m: g.m,
            f_misspec: self.run.misspec.f.clone(),
            omega_misspec: self.run.misspec.omega.clone(),
        }
    }

    /// The configured concentration block, or defaults sized to the data.
    pub fn concentration(&self, n_train: usize, dims: (usize, usize)) -> ConcentrationConfig {
        self.run.concentration.clone().unwrap_or(ConcentrationConfig {
            n_low: n_train,
            n_high: n_train,
            dim_low: dims.0,
            dim_high: dims.1,
            ..Default::default()
        })
    }

    fn solver_for(&self, entry: &MethodEntry) -> CliResult<SolverConfig> {
        let base = serde_json::to_value(self.run.setting.default_solver())
            .map_err(|e| CliError::config(e.to_string()))?;
        let Value::Object(mut obj) = base else {
            unreachable!("solver config serializes to an object")
        };
        for (k, v) in self.run.solver.iter().chain(&entry.solver) {
            if !obj.contains_key(k) {
                return Err(CliError::config(format!("unknown solver field `{k}`")));
            }
            obj.insert(k.clone(), v.clone());
        }
        let cfg: SolverConfig =
            serde_json::from_value(Value::Object(obj)).map_err(|e| CliError::config(format!("solver: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Expands the method list: one DiRoCA entry per radius pair.
    pub fn methods(&self, n_train: usize, dims: (usize, usize)) -> CliResult<Vec<MethodSpec>> {
        let mut out = Vec::new();
        for entry in &self.run.methods {
            let solver = self.solver_for(entry)?;
            if entry.kind != MethodKind::Diroca {
                out.push(MethodSpec::new(entry.kind, solver));
                continue;
            }
            for r in &self.run.radii {
                let (lo, hi) = match r {
                    RadiusEntry::Pair([lo, hi]) => (*lo, *hi),
                    RadiusEntry::Named(_) => {
                        let cc = self.concentration(n_train, dims);
                        let rad = match self.run.setting {
                            Setting::Gaussian => gaussian_radii(&cc)?,
                            Setting::Empirical => empirical_radii(&cc)?,
                        };
                        (rad.eps_low, rad.eps_high)
                    }
                };
                let spec = MethodSpec::diroca(solver.clone(), lo, hi);
                spec.solver.validate()?;
                out.push(spec);
            }
        }
        Ok(out)
    }
}

pub fn load_dataset(r: &DatasetRef, base: &Path) -> CliResult<DatasetBundle> {
    match r {
        DatasetRef::Builtin(name) => {
            if !BUILTIN.contains(&name.as_str()) {
                return Err(CliError::config(format!(
                    "unknown dataset `{name}` (built-in: {})",
                    BUILTIN.join(", ")
                )));
            }
            Ok(DatasetBundle::builtin(name)?)
        }
        DatasetRef::File { path } => {
            let p = if path.is_absolute() { path.clone() } else { base.join(path) };
            Ok(DatasetBundle::load(&p)?)
        }
    }
}
