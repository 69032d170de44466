//! Dense linear-algebra helpers shared by the geometry, model and solver code.
//!
//! Everything works on dynamically sized `nalgebra` matrices. Sample matrices
//! are stored row-major in the statistical sense: one draw per row.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative tolerance used when deciding that an eigenvalue or singular value is zero.
pub(crate) const RANK_TOL: f64 = 1e-12;

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn max_asymmetry(m: &Mat) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn check_square(m: &Mat, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn check_symmetric(m: &Mat) -> Result<()> {
    let scale = m.amax().max(1.0);
    let asym = max_asymmetry(m);
    if asym > 1e-8 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Eigen-decomposition of a symmetric matrix after symmetrizing away round-off.
pub fn sym_eigen(m: &Mat) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let s = symmetrize(m);
    let n = s.nrows();
    let scale = s.amax();
    if scale == 0.0 || !scale.is_finite() {
        return SymmetricEigen {
            eigenvectors: Mat::identity(n, n),
            eigenvalues: Vector::from_element(n, if scale == 0.0 { 0.0 } else { f64::NAN }),
        };
    }
    // Decompose a unit-scale copy with entries below rounding level flushed:
    // nalgebra returns NaN eigenpairs on some nearly-zero blocks.
    let s = (s / scale).map(|v| if v.abs() < f64::EPSILON * f64::EPSILON { 0.0 } else { v });
    let mut eig = SymmetricEigen::try_new(s.clone(), f64::EPSILON, 10_000)
        .or_else(|| SymmetricEigen::try_new(s, 1e-12, 100_000))
        .expect("symmetric eigen-decomposition converges at a loosened tolerance");
    eig.eigenvalues *= scale;
    eig
}

fn eig_floor(values: &Vector) -> f64 {
    -1e-9 * values.amax().max(1.0)
}

/// Rebuilds `V f(Λ) Vᵀ` from a symmetric eigen-decomposition.
fn spectral_map(eig: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> Mat {
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let s = f(lambda);
        scaled.column_mut(j).scale_mut(s);
    }
    symmetrize(&(scaled * v.transpose()))
}

/// Validates symmetry and positive semi-definiteness (eigenvalues above a small
/// negative floor), returning the decomposition for reuse.
pub fn check_psd(m: &Mat) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    check_square(m, "covariance")?;
    check_symmetric(m)?;
    let eig = sym_eigen(m);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if m.nrows() > 0 && min < eig_floor(&eig.eigenvalues) {
        return Err(Error::NotPsd(min));
    }
    Ok(eig)
}

/// Principal square root of a symmetric PSD matrix; negative eigenvalues from
/// round-off are clamped to zero before rooting.
pub fn psd_sqrt(m: &Mat) -> Result<Mat> {
    let eig = check_psd(m)?;
    Ok(spectral_map(&eig, |l| l.max(0.0).sqrt()))
}

/// Symmetrizes and clamps the spectrum at zero.
pub fn repair_psd(m: &Mat) -> Mat {
    let eig = sym_eigen(m);
    spectral_map(&eig, |l| l.max(0.0))
}

/// Inverse square root of a strictly positive definite matrix.
pub fn pd_inv_sqrt(m: &Mat, what: &str) -> Result<Mat> {
    let eig = check_psd(m)?;
    let max = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    if eig.eigenvalues.iter().any(|&l| l <= RANK_TOL * max.max(1.0)) {
        return Err(Error::Singular(what.to_string()));
    }
    Ok(spectral_map(&eig, |l| 1.0 / l.sqrt()))
}

/// Nuclear norm together with the polar factor `U Vᵀ` restricted to the
/// numerically nonzero singular values (a subgradient of the nuclear norm).
pub fn nuclear_norm_and_polar(x: &Mat) -> (f64, Mat) {
    let (r, c) = x.shape();
    if r == 0 || c == 0 {
        return (0.0, Mat::zeros(r, c));
    }
    // Work on a unit-scale copy: tiny entries otherwise underflow inside the SVD.
    let scale = x.amax();
    if scale == 0.0 || !scale.is_finite() {
        return (if scale == 0.0 { 0.0 } else { f64::NAN }, Mat::zeros(r, c));
    }
    let xs = x / scale;
    // nalgebra's uncapped SVD can spin forever on some inputs.
    let (nuc, polar) = match nalgebra::SVD::try_new(xs.clone(), true, true, f64::EPSILON, 10_000) {
        Some(svd) => {
            let u = svd.u.expect("requested U");
            let v_t = svd.v_t.expect("requested Vᵀ");
            let smax = svd.singular_values.amax();
            let mut polar = Mat::zeros(r, c);
            let mut nuc = 0.0;
            for (k, &s) in svd.singular_values.iter().enumerate() {
                nuc += s;
                if s > RANK_TOL * smax && s > 0.0 {
                    polar += u.column(k) * v_t.row(k);
                }
            }
            (nuc, polar)
        }
        None => nuclear_norm_and_polar_gram(&xs),
    };
    if nuc.is_finite() && polar.iter().all(|v| v.is_finite()) {
        return (nuc * scale, polar);
    }
    let (nuc, polar) = nuclear_norm_and_polar_gram(&xs);
    (nuc * scale, polar)
}

/// Same quantities through the eigen-decomposition of the smaller Gram matrix.
fn nuclear_norm_and_polar_gram(x: &Mat) -> (f64, Mat) {
    let wide = x.nrows() <= x.ncols();
    let gram = if wide { x * x.transpose() } else { x.tr_mul(x) };
    let eig = sym_eigen(&gram);
    let lmax = eig.eigenvalues.iter().fold(0.0_f64, |a, &l| a.max(l));
    let mut polar = Mat::zeros(x.nrows(), x.ncols());
    let mut nuc = 0.0;
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l <= RANK_TOL * RANK_TOL * lmax || l <= 0.0 {
            continue;
        }
        let s = l.sqrt();
        nuc += s;
        let v = eig.eigenvectors.column(k);
        polar += if wide {
            v * (v.transpose() * x) / s
        } else {
            (x * v) * v.transpose() / s
        };
    }
    (nuc, polar)
}

/// Sample mean and unbiased covariance of the rows of `x`.
pub fn mean_cov(x: &Mat) -> Result<(Vector, Mat)> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::Dimension(format!(
            "covariance estimation needs at least 2 rows, got {n}"
        )));
    }
    let mean = column_means(x);
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = symmetrize(&(centered.transpose() * &centered / (n as f64 - 1.0)));
    Ok((mean, cov))
}

pub fn column_means(x: &Mat) -> Vector {
    let n = x.nrows().max(1) as f64;
    Vector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n))
}

/// Ordinary least squares `argmin_β ‖X β − Y‖_F` via a thin SVD; rejects
/// numerically rank-deficient designs.
pub fn least_squares(x: &Mat, y: &Mat) -> Result<Mat> {
    if x.nrows() != y.nrows() {
        return Err(Error::Dimension(format!(
            "design has {} rows, response has {}",
            x.nrows(),
            y.nrows()
        )));
    }
    if x.ncols() == 0 {
        return Ok(Mat::zeros(0, y.ncols()));
    }
    let svd = nalgebra::SVD::try_new(x.clone(), true, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::RankDeficient("singular value decomposition did not converge".into()))?;
    let smax = svd.singular_values.amax();
    let smin = svd.singular_values.min();
    if x.nrows() < x.ncols() || smax == 0.0 || smin <= 1e-10 * smax {
        return Err(Error::RankDeficient(format!(
            "condition estimate {:e}",
            if smin > 0.0 { smax / smin } else { f64::INFINITY }
        )));
    }
    svd.solve(y, 0.0)
        .map_err(|e| Error::RankDeficient(e.to_string()))
}

/// Kahn topological order of the graph encoded by `adj[(j, i)] != 0` for `j → i`.
pub fn topological_order(adj: &Mat) -> Result<Vec<usize>> {
    let d = adj.nrows();
    let mut indegree = vec![0usize; d];
    for j in 0..d {
        for i in 0..d {
            if adj[(j, i)] != 0.0 {
                if i == j {
                    return Err(Error::Cyclic(format!("self-loop on variable {i}")));
                }
                indegree[i] += 1;
            }
        }
    }
    let mut ready: Vec<usize> = (0..d).filter(|&i| indegree[i] == 0).collect();
    ready.reverse();
    let mut order = Vec::with_capacity(d);
    while let Some(j) = ready.pop() {
        order.push(j);
        for i in (0..d).rev() {
            if adj[(j, i)] != 0.0 {
                indegree[i] -= 1;
                if indegree[i] == 0 {
                    ready.push(i);
                }
            }
        }
    }
    if order.len() != d {
        return Err(Error::Cyclic(format!(
            "{} variable(s) lie on a directed cycle",
            d - order.len()
        )));
    }
    Ok(order)
}

pub fn is_finite(m: &Mat) -> bool {
    m.iter().all(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_spd(d: usize, rng: &mut impl Rng) -> Mat {
        let a = Mat::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
        &a * a.transpose() + Mat::identity(d, d) * 0.1
    }

    #[test]
    fn gram_route_matches_svd_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for shape in [(2, 3), (3, 3), (2, 6)] {
            let x = Mat::from_fn(shape.0, shape.1, |_, _| rng.gen_range(-2.0..2.0));
            let (n1, p1) = nuclear_norm_and_polar(&x);
            let (n2, p2) = nuclear_norm_and_polar_gram(&x);
            assert!((n1 - n2).abs() < 1e-10);
            assert!((p1 - p2).amax() < 1e-8);
        }
    }

    #[test]
    fn sqrt_of_nearly_degenerate_cov() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let q = Mat::from_fn(6, 6, |_, _| rng.gen_range(-1.0..1.0)).qr().q();
        let d = Vector::from_vec(vec![6.7e-4, 3.1e-4, 2.1e-6, 2.2e-83, 3.3e-152, 3.5e-118]);
        let c = &q * Mat::from_diagonal(&d) * q.transpose();
        let r = psd_sqrt(&c).unwrap();
        assert!(r.iter().all(|v| v.is_finite()));
        assert!((&r * &r - &c).amax() < 1e-16);
        let tiny = Mat::from_diagonal(&Vector::from_vec(vec![1e-160, 4e-160]));
        let r = psd_sqrt(&tiny).unwrap();
        assert!((r[(1, 1)] / 2e-80 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_of_decoupled_near_zero_block() {
        let mut c = Mat::zeros(6, 6);
        for (i, j, v) in [
            (0, 0, 6.691e-4),
            (0, 1, 1.712e-19),
            (0, 2, 6.022e-4),
            (0, 5, 4.818e-4),
            (1, 1, 5.043e-35),
            (1, 2, 1.547e-19),
            (1, 5, 1.238e-19),
            (2, 2, 5.441e-4),
            (2, 5, 4.353e-4),
            (3, 3, 2.166e-83),
            (5, 5, 3.482e-4),
        ] {
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
        let eig = sym_eigen(&c);
        assert!(eig.eigenvalues.iter().chain(eig.eigenvectors.iter()).all(|v| v.is_finite()));
        let back = spectral_map(&eig, |l| l);
        assert!((back - &c).amax() < 1e-18);
    }

    #[test]
    fn polar_finite_for_tiny_entries() {
        let x = Mat::from_column_slice(
            3,
            6,
            &[
                0.146, -0.0096, 0.0, -0.0092, 0.0638, 0.0, -1.2e-18, 8.5e-18, 0.0, -3.9e-43, -1.8e-43, 0.0, -8.2e-76,
                -3.9e-76, 0.0, -0.0055, 0.0383, 0.0,
            ],
        );
        let (n, p) = nuclear_norm_and_polar(&x);
        assert!(n.is_finite() && p.iter().all(|v| v.is_finite()));
        let (n2, p2) = nuclear_norm_and_polar(&(&x * 1e-200));
        assert!((n2 / n - 1e-200).abs() < 1e-210);
        assert!((p - p2).amax() < 1e-10);
        assert_eq!(nuclear_norm_and_polar(&Mat::zeros(2, 3)).0, 0.0);
    }

    #[test]
    fn sqrt_of_identity_and_diagonal() {
        let i = Mat::identity(3, 3);
        assert!((psd_sqrt(&i).unwrap() - &i).amax() < 1e-14);
        let d = Mat::from_diagonal(&Vector::from_vec(vec![4.0, 9.0]));
        let s = psd_sqrt(&d).unwrap();
        assert!((s - Mat::from_diagonal(&Vector::from_vec(vec![2.0, 3.0]))).amax() < 1e-12);
    }

    #[test]
    fn sqrt_round_trip_random_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let a = random_spd(4, &mut rng);
            let s = psd_sqrt(&a).unwrap();
            assert!((&s * &s - &a).amax() < 1e-8);
        }
    }

    #[test]
    fn sqrt_rejects_asymmetric() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(psd_sqrt(&m), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn sqrt_clamps_tiny_negative_eigenvalues() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-12]);
        let s = psd_sqrt(&m).unwrap();
        assert!((s[(1, 1)]).abs() < 1e-12);
        let bad = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.5]);
        assert!(matches!(psd_sqrt(&bad), Err(Error::NotPsd(_))));
    }

    #[test]
    fn topo_order_detects_cycle() {
        let mut b = Mat::zeros(3, 3);
        b[(0, 1)] = 1.0;
        b[(1, 2)] = 1.0;
        assert_eq!(topological_order(&b).unwrap(), vec![0, 1, 2]);
        b[(2, 1)] = 1.0;
        assert!(matches!(topological_order(&b), Err(Error::Cyclic(_))));
    }

    #[test]
    fn nuclear_norm_matches_trace_of_sqrt() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_spd(3, &mut rng);
        let (nuc, _) = nuclear_norm_and_polar(&a);
        assert!((nuc - a.trace()).abs() < 1e-10);
    }

    #[test]
    fn least_squares_recovers_exact_solution() {
        let x = Mat::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, -1.0]);
        let beta = Mat::from_row_slice(2, 1, &[0.5, -2.0]);
        let y = &x * &beta;
        let fit = least_squares(&x, &y).unwrap();
        assert!((fit - beta).amax() < 1e-12);
        let collinear = Mat::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert!(least_squares(&collinear, &y.rows(0, 3).into_owned()).is_err());
    }
}
