//! On-disk formats: model specifications, intervention lists, ω maps, sample
//! matrices and trained abstraction maps.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env::{EmpiricalEnv, Environment, GaussianEnv};
use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::scm::{Intervention, InterventionMap, LinearScm};
use crate::solvers::AbstractionMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub from: String,
    pub to: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianNoise {
    pub mean: f64,
    pub std: f64,
}

/// Either independent Gaussian noise per variable or a CSV of exogenous
/// samples (one column per variable, header = variable names).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSpec {
    Samples { samples_path: PathBuf },
    PerVariable(BTreeMap<String, GaussianNoise>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScmSpec {
    pub variables: Vec<String>,
    pub edges: Vec<EdgeSpec>,
    pub noise: NoiseSpec,
}

fn index_of(variables: &[String], name: &str) -> Result<usize> {
    variables
        .iter()
        .position(|v| v == name)
        .ok_or_else(|| Error::InvalidModel(format!("unknown variable `{name}`")))
}

impl ScmSpec {
    pub fn to_scm(&self) -> Result<LinearScm> {
        let mut edges = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            edges.push((
                index_of(&self.variables, &e.from)?,
                index_of(&self.variables, &e.to)?,
                e.weight,
            ));
        }
        LinearScm::from_edges(self.variables.clone(), &edges)
    }

    /// Exogenous environment; sample paths are resolved against `base_dir`.
    pub fn environment(&self, base_dir: &Path) -> Result<Environment> {
        match &self.noise {
            NoiseSpec::PerVariable(map) => {
                let mut mean = Vector::zeros(self.variables.len());
                let mut stds = vec![0.0; self.variables.len()];
                for (i, v) in self.variables.iter().enumerate() {
                    let n = map
                        .get(v)
                        .ok_or_else(|| Error::InvalidModel(format!("no noise given for `{v}`")))?;
                    mean[i] = n.mean;
                    stds[i] = n.std;
                }
                if let Some(extra) = map.keys().find(|k| !self.variables.contains(k)) {
                    return Err(Error::InvalidModel(format!("noise given for unknown variable `{extra}`")));
                }
                Ok(Environment::Gaussian(GaussianEnv::diagonal(mean, &stds)?))
            }
            NoiseSpec::Samples { samples_path } => {
                let (header, m) = read_matrix_csv(&base_dir.join(samples_path))?;
                if header != self.variables {
                    return Err(Error::InvalidModel(format!(
                        "sample columns {header:?} differ from variables {:?}",
                        self.variables
                    )));
                }
                Ok(Environment::Empirical(EmpiricalEnv::new(m)?))
            }
        }
    }

    /// Replaces edge weights keyed as `"from->to"`.
    pub fn with_weights(&self, overrides: &BTreeMap<String, f64>) -> Result<Self> {
        let mut out = self.clone();
        for (key, &w) in overrides {
            let edge = out
                .edges
                .iter_mut()
                .find(|e| format!("{}->{}", e.from, e.to) == *key)
                .ok_or_else(|| Error::InvalidModel(format!("no edge `{key}` to override")))?;
            edge.weight = w;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterventionSpec {
    pub targets: BTreeMap<String, f64>,
}

impl InterventionSpec {
    pub fn to_intervention(&self, variables: &[String]) -> Result<Intervention> {
        let mut pairs = self
            .targets
            .iter()
            .map(|(k, &v)| Ok((index_of(variables, k)?, v)))
            .collect::<Result<Vec<_>>>()?;
        pairs.sort_by_key(|p| p.0);
        Intervention::new(pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect())
    }

    pub fn from_intervention(iota: &Intervention, variables: &[String]) -> Self {
        Self {
            targets: iota.pairs().map(|(t, v)| (variables[t].clone(), v)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaEntry {
    pub low: usize,
    pub high: usize,
}

/// A model pair with interventions and ω, as stored in a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: String,
    pub low: ScmSpec,
    pub high: ScmSpec,
    pub interventions_low: Vec<InterventionSpec>,
    pub interventions_high: Vec<InterventionSpec>,
    pub omega: Vec<OmegaEntry>,
}

impl DatasetSpec {
    pub fn omega_map(&self) -> Result<InterventionMap> {
        let low = self
            .interventions_low
            .iter()
            .map(|i| i.to_intervention(&self.low.variables))
            .collect::<Result<Vec<_>>>()?;
        let high = self
            .interventions_high
            .iter()
            .map(|i| i.to_intervention(&self.high.variables))
            .collect::<Result<Vec<_>>>()?;
        let mut map = vec![usize::MAX; low.len()];
        for e in &self.omega {
            if e.low >= low.len() {
                return Err(Error::InvalidIntervention(format!("ω entry for unknown low index {}", e.low)));
            }
            if map[e.low] != usize::MAX {
                return Err(Error::InvalidIntervention(format!("low intervention {} mapped twice", e.low)));
            }
            map[e.low] = e.high;
        }
        if let Some(i) = map.iter().position(|&m| m == usize::MAX) {
            return Err(Error::InvalidIntervention(format!("low intervention {i} has no ω entry")));
        }
        InterventionMap::new(low, high, map)
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("dataset spec serializes");
        hex_digest(&bytes)
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes a matrix as CSV with a header row. Values use Rust's shortest
/// round-trip formatting, so reading back is exact.
pub fn write_matrix_csv(path: &Path, header: &[String], m: &Mat) -> Result<()> {
    if header.len() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{} header names for {} columns",
            header.len(),
            m.ncols()
        )));
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    let mut row = Vec::with_capacity(m.ncols());
    for i in 0..m.nrows() {
        row.clear();
        row.extend((0..m.ncols()).map(|j| m[(i, j)].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<(Vec<String>, Mat)> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut data = Vec::new();
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Dimension(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                rows + 1,
                rec.len(),
                header.len()
            )));
        }
        for field in rec.iter() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::InvalidModel(format!("{}: cannot parse `{field}` as a number", path.display()))
            })?;
            data.push(v);
        }
        rows += 1;
    }
    Ok((header.clone(), Mat::from_row_slice(rows, header.len(), &data)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMetadata {
    pub method: String,
    pub eps_low: f64,
    pub eps_high: f64,
    pub seed: u64,
    pub fold: usize,
    /// Number of ω pairs reassigned during training; 0 for the true ω.
    #[serde(default)]
    pub omega_misalign: usize,
    pub dataset_hash: String,
}

/// Serialized abstraction map: shape, row-major entries, provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapFile {
    pub shape: [usize; 2],
    pub entries: Vec<f64>,
    pub metadata: MapMetadata,
}

impl MapFile {
    pub fn new(map: &AbstractionMap, metadata: MapMetadata) -> Self {
        let t = map.matrix();
        let entries = (0..t.nrows())
            .flat_map(|i| (0..t.ncols()).map(move |j| t[(i, j)]))
            .collect();
        Self {
            shape: [t.nrows(), t.ncols()],
            entries,
            metadata,
        }
    }

    pub fn to_map(&self) -> Result<AbstractionMap> {
        let [h, l] = self.shape;
        if self.entries.len() != h * l {
            return Err(Error::Dimension(format!(
                "map file declares {h}x{l} but holds {} entries",
                self.entries.len()
            )));
        }
        AbstractionMap::new(Mat::from_row_slice(h, l, &self.entries))
    }
}
