//! Abstraction error of a fitted map on held-out interventional samples.

use crate::error::{Error, Result};
use crate::geometry::gelbrich_distance_sq;
use crate::linalg::{mean_cov, Mat};

/// Samples of one `(ι, ω(ι))` pair: low-level rows and high-level rows.
#[derive(Debug, Clone)]
pub struct TestPair {
    pub x_low: Mat,
    pub x_high: Mat,
}

fn check(t: &Mat, pairs: &[TestPair], q: &[f64]) -> Result<()> {
    if pairs.len() != q.len() {
        return Err(Error::Dimension(format!("{} pairs but {} weights", pairs.len(), q.len())));
    }
    if pairs.is_empty() {
        return Err(Error::Eval("no intervention pairs to score".into()));
    }
    for p in pairs {
        if p.x_low.ncols() != t.ncols() || p.x_high.ncols() != t.nrows() {
            return Err(Error::Dimension(format!(
                "map is {}x{} but samples have {} low and {} high columns",
                t.nrows(),
                t.ncols(),
                p.x_low.ncols(),
                p.x_high.ncols()
            )));
        }
    }
    Ok(())
}

/// q-weighted mean over pairs of `W₂` between Gaussians fitted to the mapped
/// low-level samples and to the high-level samples.
pub fn abstraction_error_gaussian(t: &Mat, pairs: &[TestPair], q: &[f64]) -> Result<f64> {
    check(t, pairs, q)?;
    let mut total = 0.0;
    for (p, &w) in pairs.iter().zip(q) {
        if p.x_low.nrows() < 2 || p.x_high.nrows() < 2 {
            return Err(Error::Eval("covariance estimation needs at least 2 rows".into()));
        }
        let (ml, cl) = mean_cov(&(&p.x_low * t.transpose()))?;
        let (mh, ch) = mean_cov(&p.x_high)?;
        total += w * gelbrich_distance_sq(&ml, &cl, &mh, &ch)?.max(0.0).sqrt();
    }
    Ok(total)
}

/// q-weighted mean over pairs of `‖X_ℓ Tᵀ − X_h‖_F / √n` with rows paired by index.
pub fn abstraction_error_empirical(t: &Mat, pairs: &[TestPair], q: &[f64]) -> Result<f64> {
    check(t, pairs, q)?;
    let mut total = 0.0;
    for (p, &w) in pairs.iter().zip(q) {
        let n = p.x_low.nrows();
        if n != p.x_high.nrows() || n == 0 {
            return Err(Error::Dimension(format!(
                "paired samples need equal nonzero row counts, got {} and {}",
                n,
                p.x_high.nrows()
            )));
        }
        let r = &p.x_low * t.transpose() - &p.x_high;
        total += w * r.norm() / (n as f64).sqrt();
    }
    Ok(total)
}
