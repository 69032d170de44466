//! Linear additive-noise structural causal models.
//!
//! Adjacency convention: `B[(j, i)]` is the weight of the edge `j → i`, so the
//! endogenous vector satisfies `x = Bᵀ x + u` and the reduced form is
//! `x = M u` with `M = (I − Bᵀ)⁻¹`. Sample matrices hold one draw per row, in
//! which case the same relations read `X = U Mᵀ` and `U = X (I − B)`.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::linalg::{least_squares, topological_order, Mat};

/// A hard intervention `do(X_targets = values)`. Empty targets is the
/// observational (null) intervention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intervention {
    targets: Vec<usize>,
    values: Vec<f64>,
}

impl Intervention {
    pub fn new(targets: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if targets.len() != values.len() {
            return Err(Error::InvalidIntervention(format!(
                "{} targets but {} values",
                targets.len(),
                values.len()
            )));
        }
        let distinct: BTreeSet<_> = targets.iter().collect();
        if distinct.len() != targets.len() {
            return Err(Error::InvalidIntervention(format!(
                "duplicate targets in {targets:?}"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidIntervention("non-finite value".into()));
        }
        Ok(Self { targets, values })
    }

    pub fn null() -> Self {
        Self {
            targets: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn single(target: usize, value: f64) -> Self {
        Self {
            targets: vec![target],
            values: vec![value],
        }
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_null(&self) -> bool {
        self.targets.is_empty()
    }

    /// Number of intervened variables.
    pub fn complexity(&self) -> usize {
        self.targets.len()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.targets.iter().copied().zip(self.values.iter().copied())
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if let Some(&bad) = self.targets.iter().find(|&&t| t >= dim) {
            return Err(Error::InvalidIntervention(format!(
                "target {bad} out of range for a {dim}-variable model"
            )));
        }
        Ok(())
    }

    /// `keep[i]` is false exactly for intervened coordinates.
    pub fn keep_mask(&self, dim: usize) -> Vec<bool> {
        let mut keep = vec![true; dim];
        for &t in &self.targets {
            keep[t] = false;
        }
        keep
    }
}

/// The map ω from low-level to high-level interventions, stored as the two
/// intervention lists plus an index map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionMap {
    low: Vec<Intervention>,
    high: Vec<Intervention>,
    map: Vec<usize>,
}

impl InterventionMap {
    pub fn new(low: Vec<Intervention>, high: Vec<Intervention>, map: Vec<usize>) -> Result<Self> {
        let out = Self::unchecked_surjectivity(low, high, map)?;
        let hit: BTreeSet<_> = out.map.iter().copied().collect();
        if hit.len() != out.high.len() {
            let missing: Vec<_> = (0..out.high.len()).filter(|j| !hit.contains(j)).collect();
            return Err(Error::InvalidIntervention(format!(
                "map is not surjective, high-level interventions {missing:?} are never hit"
            )));
        }
        Ok(out)
    }

    fn unchecked_surjectivity(low: Vec<Intervention>, high: Vec<Intervention>, map: Vec<usize>) -> Result<Self> {
        if map.len() != low.len() {
            return Err(Error::InvalidIntervention(format!(
                "map assigns {} of {} low-level interventions",
                map.len(),
                low.len()
            )));
        }
        if let Some(&bad) = map.iter().find(|&&j| j >= high.len()) {
            return Err(Error::InvalidIntervention(format!(
                "map points at high-level intervention {bad}, only {} exist",
                high.len()
            )));
        }
        Ok(Self { low, high, map })
    }

    pub fn low(&self) -> &[Intervention] {
        &self.low
    }

    pub fn high(&self) -> &[Intervention] {
        &self.high
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn len(&self) -> usize {
        self.low.len()
    }

    pub fn is_empty(&self) -> bool {
        self.low.is_empty()
    }

    /// `(low index, high index)` for every pair.
    pub fn index_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.map.iter().copied().enumerate()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&Intervention, &Intervention)> + '_ {
        self.map
            .iter()
            .enumerate()
            .map(move |(i, &j)| (&self.low[i], &self.high[j]))
    }

    /// Same intervention lists with a different assignment. Surjectivity is
    /// not required here, since a corrupted map may leave targets unused.
    pub fn with_map(&self, map: Vec<usize>) -> Result<Self> {
        Self::unchecked_surjectivity(self.low.clone(), self.high.clone(), map)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearScm {
    variables: Vec<String>,
    adjacency: Mat,
    order: Vec<usize>,
}

impl LinearScm {
    pub fn new(variables: Vec<String>, adjacency: Mat) -> Result<Self> {
        let d = variables.len();
        if adjacency.nrows() != d || adjacency.ncols() != d {
            return Err(Error::Dimension(format!(
                "{d} variables but a {}x{} adjacency matrix",
                adjacency.nrows(),
                adjacency.ncols()
            )));
        }
        let names: BTreeSet<_> = variables.iter().collect();
        if names.len() != d {
            return Err(Error::InvalidModel("duplicate variable names".into()));
        }
        if adjacency.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidModel("non-finite edge weight".into()));
        }
        let order = topological_order(&adjacency)?;
        Ok(Self {
            variables,
            adjacency,
            order,
        })
    }

    /// Builds a model from `(from, to, weight)` triples.
    pub fn from_edges(variables: Vec<String>, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let d = variables.len();
        let mut b = Mat::zeros(d, d);
        for &(from, to, w) in edges {
            if from >= d || to >= d {
                return Err(Error::InvalidModel(format!("edge {from}->{to} out of range")));
            }
            b[(from, to)] = w;
        }
        Self::new(variables, b)
    }

    pub fn dim(&self) -> usize {
        self.variables.len()
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn adjacency(&self) -> &Mat {
        &self.adjacency
    }

    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    pub fn parents(&self, i: usize) -> Vec<usize> {
        (0..self.dim())
            .filter(|&j| self.adjacency[(j, i)] != 0.0)
            .collect()
    }

    /// Nonzero edges as `(from, to, weight)` in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let d = self.dim();
        let mut out = Vec::new();
        for j in 0..d {
            for i in 0..d {
                let w = self.adjacency[(j, i)];
                if w != 0.0 {
                    out.push((j, i, w));
                }
            }
        }
        out
    }

    /// `M = (I − Bᵀ)⁻¹`, by forward substitution along the topological order.
    pub fn mixing_matrix(&self) -> Mat {
        let d = self.dim();
        let mut m = Mat::zeros(d, d);
        for k in 0..d {
            for &i in &self.order {
                let mut v = if i == k { 1.0 } else { 0.0 };
                for j in 0..d {
                    let w = self.adjacency[(j, i)];
                    if w != 0.0 {
                        v += w * m[(j, k)];
                    }
                }
                m[(i, k)] = v;
            }
        }
        m
    }

    /// Removes every incoming edge of the intervened variables.
    pub fn mutilate(&self, iota: &Intervention) -> Result<Self> {
        iota.validate(self.dim())?;
        let mut b = self.adjacency.clone();
        for &t in iota.targets() {
            b.column_mut(t).fill(0.0);
        }
        Ok(Self {
            variables: self.variables.clone(),
            adjacency: b,
            // removing edges keeps any topological order valid
            order: self.order.clone(),
        })
    }

    /// Reduced-form matrix of the intervened model (`L_ι` or `H_η`).
    pub fn reduced_transform(&self, iota: &Intervention) -> Result<Mat> {
        Ok(self.mutilate(iota)?.mixing_matrix())
    }

    /// Draws `n` endogenous samples under `iota`; deterministic in `seed`.
    pub fn sample_endogenous(
        &self,
        iota: &Intervention,
        env: &Environment,
        n: usize,
        seed: u64,
    ) -> Result<Mat> {
        if n == 0 {
            return Err(Error::Dimension("sample count must be at least 1".into()));
        }
        if env.dim() != self.dim() {
            return Err(Error::Dimension(format!(
                "environment has dimension {}, model has {}",
                env.dim(),
                self.dim()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let exo = env.intervene(iota)?.sample(n, &mut rng)?;
        let m = self.reduced_transform(iota)?;
        Ok(exo * m.transpose())
    }

    /// Recovers exogenous samples: `U = X (I − B)`.
    pub fn abduct(&self, endo: &Mat) -> Result<Mat> {
        if endo.ncols() != self.dim() {
            return Err(Error::Dimension(format!(
                "samples have {} columns, model has {} variables",
                endo.ncols(),
                self.dim()
            )));
        }
        Ok(endo - endo * &self.adjacency)
    }

    /// Fits edge weights by per-variable least squares of each child on its
    /// parents (with an intercept that is folded back into the exogenous term).
    /// Returns the fitted model and the abducted exogenous samples.
    pub fn estimate_coefficients(
        endo_obs: &Mat,
        variables: Vec<String>,
        edges: &[(usize, usize)],
    ) -> Result<(Self, Mat)> {
        let (n, d) = endo_obs.shape();
        if d != variables.len() {
            return Err(Error::Dimension(format!(
                "{d} data columns for {} variables",
                variables.len()
            )));
        }
        if n <= d {
            return Err(Error::RankDeficient(format!(
                "need more rows than variables, got n={n}, d={d}"
            )));
        }
        let mut skeleton = Mat::zeros(d, d);
        for &(from, to) in edges {
            if from >= d || to >= d {
                return Err(Error::InvalidModel(format!("edge {from}->{to} out of range")));
            }
            skeleton[(from, to)] = 1.0;
        }
        topological_order(&skeleton)?;
        let mut b = Mat::zeros(d, d);
        for i in 0..d {
            let parents: Vec<usize> = (0..d).filter(|&j| skeleton[(j, i)] != 0.0).collect();
            if parents.is_empty() {
                continue;
            }
            let mut design = Mat::from_element(n, parents.len() + 1, 1.0);
            for (c, &p) in parents.iter().enumerate() {
                design.set_column(c, &endo_obs.column(p));
            }
            let y = endo_obs.column(i).into_owned();
            let beta = least_squares(&design, &Mat::from_column_slice(n, 1, y.as_slice()))
                .map_err(|e| Error::RankDeficient(format!("variable {i}: {e}")))?;
            for (c, &p) in parents.iter().enumerate() {
                b[(p, i)] = beta[(c, 0)];
            }
        }
        let scm = Self::new(variables, b)?;
        let residuals = scm.abduct(endo_obs)?;
        Ok((scm, residuals))
    }
}
