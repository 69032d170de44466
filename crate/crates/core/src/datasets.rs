//! Built-in model pairs: a three-variable chain abstracted to two variables
//! (`slc`) and a six-variable lung-cancer style graph abstracted to three
//! (`lilucas`).

use std::collections::BTreeMap;
use std::path::Path;

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::io::DatasetSpec;
use crate::scm::{InterventionMap, LinearScm};

const SLC_JSON: &str = include_str!("../data/slc.json");
const LILUCAS_JSON: &str = include_str!("../data/lilucas.json");

pub const BUILTIN: &[&str] = &["slc", "lilucas"];

pub fn builtin_spec(name: &str) -> Result<DatasetSpec> {
    let text = match name {
        "slc" => SLC_JSON,
        "lilucas" => LILUCAS_JSON,
        other => {
            return Err(Error::Config {
                field: "dataset".into(),
                reason: format!("unknown built-in dataset `{other}` (expected one of {BUILTIN:?})"),
            })
        }
    };
    Ok(serde_json::from_str(text)?)
}

/// A parsed and validated model pair.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub spec: DatasetSpec,
    pub low: LinearScm,
    pub high: LinearScm,
    pub omega: InterventionMap,
    pub env_low: Environment,
    pub env_high: Environment,
}

impl DatasetBundle {
    pub fn from_spec(spec: DatasetSpec, base_dir: &Path) -> Result<Self> {
        let low = spec.low.to_scm()?;
        let high = spec.high.to_scm()?;
        let omega = spec.omega_map()?;
        for i in omega.low() {
            i.validate(low.dim())?;
        }
        for i in omega.high() {
            i.validate(high.dim())?;
        }
        let env_low = spec.low.environment(base_dir)?;
        let env_high = spec.high.environment(base_dir)?;
        Ok(Self {
            spec,
            low,
            high,
            omega,
            env_low,
            env_high,
        })
    }

    pub fn builtin(name: &str) -> Result<Self> {
        Self::from_spec(builtin_spec(name)?, Path::new("."))
    }

    /// A built-in dataset with some edge weights replaced (keys `"from->to"`),
    /// applied to whichever level owns the edge.
    pub fn builtin_with_weights(name: &str, overrides: &BTreeMap<String, f64>) -> Result<Self> {
        let mut spec = builtin_spec(name)?;
        let (mut lo, mut hi) = (BTreeMap::new(), BTreeMap::new());
        for (k, &w) in overrides {
            let owns = |s: &crate::io::ScmSpec| s.edges.iter().any(|e| format!("{}->{}", e.from, e.to) == *k);
            if owns(&spec.low) {
                lo.insert(k.clone(), w);
            } else if owns(&spec.high) {
                hi.insert(k.clone(), w);
            } else {
                return Err(Error::InvalidModel(format!("no edge `{k}` in dataset `{name}`")));
            }
        }
        spec.low = spec.low.with_weights(&lo)?;
        spec.high = spec.high.with_weights(&hi)?;
        Self::from_spec(spec, Path::new("."))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let spec: DatasetSpec = crate::io::read_json(path)?;
        Self::from_spec(spec, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }
}
