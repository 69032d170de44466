//! Misspecification generators: nonlinear structural equations and
//! corrupted intervention maps.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scm::{Intervention, InterventionMap, LinearScm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    Sin,
    Tanh,
}

impl Nonlinearity {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Nonlinearity::Sin => x.sin(),
            Nonlinearity::Tanh => x.tanh(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Nonlinearity::Sin => "sin",
            Nonlinearity::Tanh => "tanh",
        }
    }
}

/// Evaluates `x_j = k·f(Σ_p w_pj x_p) + u_j` in topological order on given
/// exogenous rows, with intervened variables pinned.
pub fn f_misspec_apply(scm: &LinearScm, k: f64, fnl: Nonlinearity, exo: &Mat, iota: &Intervention) -> Result<Mat> {
    if exo.ncols() != scm.dim() {
        return Err(Error::Dimension(format!(
            "exogenous samples have {} columns, model has {} variables",
            exo.ncols(),
            scm.dim()
        )));
    }
    iota.validate(scm.dim())?;
    let b = scm.adjacency();
    let mut x = exo.clone();
    let pinned: Vec<Option<f64>> = (0..scm.dim())
        .map(|j| iota.pairs().find(|&(t, _)| t == j).map(|(_, v)| v))
        .collect();
    let parents: Vec<Vec<usize>> = (0..scm.dim()).map(|j| scm.parents(j)).collect();
    for &j in scm.topological_order() {
        if let Some(v) = pinned[j] {
            x.column_mut(j).fill(v);
            continue;
        }
        if parents[j].is_empty() {
            // f(0) = 0 for both nonlinearities.
            continue;
        }
        for r in 0..x.nrows() {
            let s: f64 = parents[j].iter().map(|&p| b[(p, j)] * x[(r, p)]).sum();
            x[(r, j)] = k * fnl.apply(s) + exo[(r, j)];
        }
    }
    Ok(x)
}

/// Draws `n` samples from the nonlinear variant of `scm` under `iota`.
pub fn f_misspec_sample(
    scm: &LinearScm,
    k: f64,
    fnl: Nonlinearity,
    env: &Environment,
    iota: &Intervention,
    n: usize,
    seed: u64,
) -> Result<Mat> {
    if env.dim() != scm.dim() {
        return Err(Error::Dimension(format!(
            "environment has dimension {}, model has {}",
            env.dim(),
            scm.dim()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exo = env.intervene(iota)?.sample(n, &mut rng)?;
    f_misspec_apply(scm, k, fnl, &exo, iota)
}

/// Reassigns `n_misalign` randomly chosen non-null low-level interventions
/// to a different, non-null high-level intervention whose target count is
/// within `delta` of the low-level one, falling back to the nearest count.
pub fn omega_misspec(omega: &InterventionMap, n_misalign: usize, delta: usize, seed: u64) -> Result<InterventionMap> {
    let candidates: Vec<usize> = (0..omega.len()).filter(|&i| !omega.low()[i].is_null()).collect();
    if n_misalign > candidates.len() {
        return Err(Error::InvalidIntervention(format!(
            "cannot misalign {n_misalign} pairs, only {} are reassignable",
            candidates.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen: Vec<usize> = candidates.choose_multiple(&mut rng, n_misalign).copied().collect();
    let mut map = omega.map().to_vec();
    for i in chosen {
        let c = omega.low()[i].complexity();
        let others: Vec<(usize, usize)> = omega
            .high()
            .iter()
            .enumerate()
            .filter(|&(j, h)| j != omega.map()[i] && !h.is_null())
            .map(|(j, h)| (j, h.complexity().abs_diff(c)))
            .collect();
        let Some(best) = others.iter().map(|o| o.1).min() else {
            return Err(Error::InvalidIntervention(format!(
                "no alternative high-level intervention for low-level intervention {i}"
            )));
        };
        let limit = if best <= delta { delta } else { best };
        let pool: Vec<usize> = others.iter().filter(|o| o.1 <= limit).map(|o| o.0).collect();
        map[i] = *pool.choose(&mut rng).expect("pool contains the nearest candidate");
    }
    omega.with_map(map)
}
