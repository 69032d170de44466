//! `diroca dataset`: model files plus interventional samples.

use std::path::{Path, PathBuf};

use diroca_core::datasets::{DatasetBundle, BUILTIN};
use diroca_core::eval::{generate_data, ExperimentData};
use diroca_core::io::{read_json, read_matrix_csv, write_json, write_matrix_csv, InterventionSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";
pub const DEFAULT_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataManifest {
    pub dataset: String,
    pub dataset_hash: String,
    pub n: usize,
    pub seed: u64,
    pub low: Vec<SampleFile>,
    pub high: Vec<SampleFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleFile {
    pub file: String,
    pub intervention: InterventionSpec,
}

fn write_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::config(format!("cannot write {}: {e}", path.display()))
}

pub fn cmd_dataset(name: &str, out: &Path, n: usize, seed: u64) -> CliResult<()> {
    let bundle = if BUILTIN.contains(&name) {
        DatasetBundle::builtin(name)?
    } else if Path::new(name).is_file() {
        DatasetBundle::load(Path::new(name))?
    } else {
        return Err(CliError::usage(format!(
            "`{name}` is neither a built-in dataset ({}) nor a file",
            BUILTIN.join(", ")
        )));
    };
    if n < 2 {
        return Err(CliError::usage("--n must be at least 2"));
    }
    let data = generate_data(&bundle, n, seed)?;
    std::fs::create_dir_all(out).map_err(|e| write_err(out, e))?;

    let spec_path = out.join("dataset.json");
    write_json(&spec_path, &bundle.spec).map_err(|e| write_err(&spec_path, e))?;
    let files = |level: &str, mats: &[diroca_core::linalg::Mat], vars: &[String], ivs: &[diroca_core::scm::Intervention]| {
        mats.iter()
            .zip(ivs)
            .enumerate()
            .map(|(i, (m, iota))| {
                let file = format!("{level}_{i:02}.csv");
                let p = out.join(&file);
                write_matrix_csv(&p, vars, m).map_err(|e| write_err(&p, e))?;
                Ok(SampleFile {
                    file,
                    intervention: InterventionSpec::from_intervention(iota, vars),
                })
            })
            .collect::<CliResult<Vec<_>>>()
    };
    let low = files("low", data.low(), bundle.low.variables(), bundle.omega.low())?;
    let high = files("high", data.high(), bundle.high.variables(), bundle.omega.high())?;
    let manifest = DataManifest {
        dataset: bundle.name().to_string(),
        dataset_hash: bundle.spec.content_hash(),
        n,
        seed,
        low,
        high,
    };
    let mp = out.join(MANIFEST);
    write_json(&mp, &manifest).map_err(|e| write_err(&mp, e))?;
    println!(
        "wrote {} low and {} high sample files ({n} rows each) to {}",
        manifest.low.len(),
        manifest.high.len(),
        out.display()
    );
    Ok(())
}

/// Reads samples written by [`cmd_dataset`], checking they belong to `bundle`.
pub fn load_data(dir: &Path, bundle: &DatasetBundle) -> CliResult<(DataManifest, ExperimentData)> {
    let mp: PathBuf = dir.join(MANIFEST);
    if !mp.is_file() {
        return Err(CliError::missing(format!(
            "no dataset in {} (run `diroca dataset` first)",
            dir.display()
        )));
    }
    let manifest: DataManifest = read_json(&mp).map_err(|e| CliError::artifact(&mp, e))?;
    if manifest.dataset_hash != bundle.spec.content_hash() {
        return Err(CliError::missing(format!(
            "{} holds samples of a different dataset model (`{}`) than the config's `{}`",
            dir.display(),
            manifest.dataset,
            bundle.name()
        )));
    }
    let read = |files: &[SampleFile]| -> CliResult<Vec<diroca_core::linalg::Mat>> {
        files
            .iter()
            .map(|f| {
                let p = dir.join(&f.file);
                read_matrix_csv(&p).map(|(_, m)| m).map_err(|e| CliError::artifact(&p, e))
            })
            .collect()
    };
    let data = ExperimentData::new(read(&manifest.low)?, read(&manifest.high)?)
        .map_err(|e| CliError::artifact(dir, e))?;
    Ok((manifest, data))
}
