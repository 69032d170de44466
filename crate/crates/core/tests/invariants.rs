use approx::assert_abs_diff_eq;
use diroca_core::env::GaussianEnv;
use diroca_core::eval::{contaminate, ContaminationSpec, NoiseKind};
use diroca_core::geometry::{gelbrich_distance_sq, project_frobenius_ball, project_gelbrich_ball};
use diroca_core::linalg::{Mat, Vector};
use diroca_core::radius::{empirical_radii, gaussian_radii, ConcentrationConfig};
use diroca_core::scm::{Intervention, LinearScm};
use proptest::prelude::*;

fn mat(r: usize, c: usize) -> impl Strategy<Value = Mat> {
    prop::collection::vec(-2.0..2.0f64, r * c).prop_map(move |v| Mat::from_row_slice(r, c, &v))
}

fn gaussian(d: usize) -> impl Strategy<Value = GaussianEnv> {
    (prop::collection::vec(-2.0..2.0f64, d), mat(d, d)).prop_map(move |(m, a)| {
        let cov = &a * a.transpose() + Mat::identity(d, d) * 0.1;
        GaussianEnv::new(Vector::from_vec(m), cov).unwrap()
    })
}

/// Random DAG on `d` nodes: edges only from lower to higher index.
fn scm(d: usize) -> impl Strategy<Value = LinearScm> {
    prop::collection::vec(prop::option::weighted(0.5, 0.5..2.0f64), d * (d - 1) / 2).prop_map(move |w| {
        let mut edges = Vec::new();
        let mut k = 0;
        for j in 0..d {
            for i in j + 1..d {
                if let Some(v) = w[k] {
                    edges.push((j, i, v));
                }
                k += 1;
            }
        }
        let names = (0..d).map(|i| format!("X{i}")).collect();
        LinearScm::from_edges(names, &edges).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gelbrich_symmetric_and_nonnegative(a in gaussian(3), b in gaussian(3)) {
        let ab = gelbrich_distance_sq(a.mean(), a.cov(), b.mean(), b.cov()).unwrap();
        let ba = gelbrich_distance_sq(b.mean(), b.cov(), a.mean(), a.cov()).unwrap();
        prop_assert!(ab >= -1e-8);
        assert_abs_diff_eq!(ab, ba, epsilon = 1e-8 * (1.0 + ab));
        let aa = gelbrich_distance_sq(a.mean(), a.cov(), a.mean(), a.cov()).unwrap();
        assert_abs_diff_eq!(aa, 0.0, epsilon = 1e-8);
    }

    #[test]
    fn gelbrich_projection_feasible_and_fixed_inside(a in gaussian(3), c in gaussian(3), eps in 0.0..3.0f64) {
        let p = project_gelbrich_ball(&a, &c, eps).unwrap();
        let d = gelbrich_distance_sq(p.mean(), p.cov(), c.mean(), c.cov()).unwrap().max(0.0).sqrt();
        prop_assert!(d <= eps + 1e-8, "distance {} radius {}", d, eps);
        let d0 = gelbrich_distance_sq(a.mean(), a.cov(), c.mean(), c.cov()).unwrap().max(0.0).sqrt();
        if d0 <= eps {
            prop_assert!((p.mean() - a.mean()).amax() < 1e-12);
            prop_assert!((p.cov() - a.cov()).amax() < 1e-12);
        }
    }

    #[test]
    fn frobenius_projection_feasible(theta in mat(5, 3), bound in 0.0..4.0f64) {
        let p = project_frobenius_ball(&theta, bound);
        prop_assert!(p.norm() <= bound + 1e-12);
        if theta.norm() <= bound {
            prop_assert_eq!(p, theta);
        }
    }

    #[test]
    fn mixing_matrix_inverts_structure(s in scm(5)) {
        let m = s.mixing_matrix();
        let resid = &m * (Mat::identity(5, 5) - s.adjacency().transpose()) - Mat::identity(5, 5);
        prop_assert!(resid.amax() < 1e-10);
    }

    #[test]
    fn mutilation_idempotent(s in scm(5), t in 0usize..5, v in -2.0..2.0f64) {
        let iota = Intervention::single(t, v);
        let once = s.mutilate(&iota).unwrap();
        let twice = once.mutilate(&iota).unwrap();
        prop_assert_eq!(once.adjacency(), twice.adjacency());
    }

    #[test]
    fn abduction_inverts_observational_sampling(s in scm(4), u in mat(20, 4)) {
        let x = u.clone() * s.mixing_matrix().transpose();
        prop_assert!((s.abduct(&x).unwrap() - u).amax() < 1e-9);
    }

    #[test]
    fn contamination_additive(x in mat(10, 2), alpha in 0.0..=1.0f64, sigma in 0.0..5.0f64, seed in any::<u64>()) {
        let spec = ContaminationSpec { alpha, sigma, noise: NoiseKind::Exponential { rate: 1.0 }, seed };
        let n = contaminate(&Mat::zeros(10, 2), &ContaminationSpec { alpha: 1.0, ..spec }).unwrap();
        let out = contaminate(&x, &spec).unwrap();
        prop_assert!((out - (&x + n * alpha)).amax() < 1e-12);
    }

    #[test]
    fn radii_shrink_with_samples(n in 10usize..100_000, dim_low in 1usize..8, dim_high in 1usize..8) {
        let cfg = |n| ConcentrationConfig { n_low: n, n_high: n, dim_low, dim_high, ..Default::default() };
        for f in [gaussian_radii, empirical_radii] {
            let a = f(&cfg(n)).unwrap();
            let b = f(&cfg(2 * n)).unwrap();
            prop_assert!(b.eps_low < a.eps_low && b.eps_high < a.eps_high);
            prop_assert!(a.eps_joint >= a.eps_low.max(a.eps_high) - 1e-15);
            prop_assert!(a.eps_joint <= a.eps_low + a.eps_high + 1e-15);
        }
    }
}
