//! `diroca report`: per-figure curve files from results CSVs.
//!
//! Each curve file has one row per plotted point:
//! `source,noise_kind,fixed,method,eps_low,eps_high,x,count,mean,std`, where
//! `fixed` is the grid coordinate held constant along the curve.

use std::fs;
use std::path::{Path, PathBuf};

use diroca_core::eval::{read_results_csv, summarize, CellSummary};
use diroca_core::io::write_json;
use serde::Serialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize)]
struct CurvePoint<'a> {
    source: &'a str,
    noise_kind: &'a str,
    fixed: String,
    method: &'a str,
    eps_low: f64,
    eps_high: f64,
    x: f64,
    count: usize,
    mean: f64,
    std: f64,
}

#[derive(Clone, Copy, PartialEq)]
enum Axis {
    Alpha,
    Sigma,
    K,
    Misalign,
}

impl Axis {
    const ALL: [Axis; 4] = [Axis::Alpha, Axis::Sigma, Axis::K, Axis::Misalign];

    fn file(self) -> &'static str {
        match self {
            Axis::Alpha => "curve_alpha.csv",
            Axis::Sigma => "curve_sigma.csv",
            Axis::K => "curve_k.csv",
            Axis::Misalign => "curve_n_misalign.csv",
        }
    }

    /// `(fixed, x)` for a cell that belongs on this axis.
    fn place(self, c: &CellSummary) -> Option<(String, f64)> {
        let misspec = c.noise_kind.starts_with("fmisspec_") || c.noise_kind == "omega_misalign";
        match self {
            Axis::Alpha if !misspec => Some((format!("sigma={}", c.sigma), c.alpha)),
            Axis::Sigma if !misspec => Some((format!("alpha={}", c.alpha), c.sigma)),
            Axis::K if c.noise_kind.starts_with("fmisspec_") => Some((String::new(), c.sigma)),
            Axis::Misalign if c.noise_kind == "omega_misalign" => Some((String::new(), c.sigma)),
            _ => None,
        }
    }
}

fn resolve_input(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("results.csv")
    } else {
        p.to_path_buf()
    }
}

fn source_name(p: &Path) -> String {
    let p = if p.is_dir() { p } else { p.parent().unwrap_or(p) };
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

pub fn cmd_report(inputs: &[PathBuf], out: &Path) -> CliResult<()> {
    let mut tables = Vec::new();
    for p in inputs {
        let f = resolve_input(p);
        let file = fs::File::open(&f).map_err(|e| CliError::artifact(&f, e))?;
        let rows = read_results_csv(file).map_err(|e| CliError::artifact(&f, e))?;
        tables.push((source_name(p), summarize(&rows)));
    }
    fs::create_dir_all(out).map_err(|e| CliError::config(format!("cannot write {}: {e}", out.display())))?;

    let mut written = Vec::new();
    for axis in Axis::ALL {
        let mut points = Vec::new();
        for (src, cells) in &tables {
            for c in cells {
                if let Some((fixed, x)) = axis.place(c) {
                    points.push(CurvePoint {
                        source: src,
                        noise_kind: &c.noise_kind,
                        fixed,
                        method: &c.method,
                        eps_low: c.eps_low,
                        eps_high: c.eps_high,
                        x,
                        count: c.count,
                        mean: c.mean,
                        std: c.std,
                    });
                }
            }
        }
        if points.is_empty() {
            continue;
        }
        let path = out.join(axis.file());
        let werr = |e: csv::Error| CliError::config(format!("cannot write {}: {e}", path.display()));
        let mut w = csv::Writer::from_path(&path).map_err(werr)?;
        for p in &points {
            w.serialize(p).map_err(werr)?;
        }
        w.flush().map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
        written.push(axis.file());
    }
    let cells: Vec<_> = tables
        .iter()
        .map(|(src, cells)| serde_json::json!({ "source": src, "cells": cells }))
        .collect();
    let cp = out.join("cells.json");
    write_json(&cp, &cells).map_err(|e| CliError::config(format!("cannot write {}: {e}", cp.display())))?;
    println!("wrote {} to {}", written.join(", "), out.display());
    Ok(())
}
