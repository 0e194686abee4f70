use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use symcov::estimators::fixed_point_step;
use symcov::objectives::{generic_nll, midpoint_convexity_check};
use symcov::sampling::{
    derive_seed, random_invariant_spd, random_spd, sample_elliptical, EllipticalModel,
};
use symcov::symmetry::{
    commutation_residual, generator_equivalence_check, make_circulant_group,
    make_persymmetric_group, make_proper_complex_group, make_proper_quaternion_group,
};
use symcov::verify::families_dim8;
use symcov::*;

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

fn t(v: f64) -> GeodesicParam {
    GeodesicParam::new(v).unwrap()
}

/// Random orthogonal matrix from the QR factor of a Gaussian draw.
fn random_orthogonal(p: usize, seed: u64) -> DMatrix<f64> {
    let g = random_spd(p, seed).unwrap().into_matrix()
        + DMatrix::from_fn(p, p, |i, j| (i as f64 - j as f64) * 0.37);
    g.qr().q()
}

/// SPD matrix with spectrum in [0.1, 10] and a random eigenbasis; keeps
/// round-off well inside the 1e-9 tolerances.
fn bounded_spd(p: usize, seed: u64) -> SpdMatrix {
    let v = random_orthogonal(p, seed);
    let spectrum = DVector::from_fn(p, |i, _| {
        10f64.powf(-1.0 + 2.0 * ((seed.wrapping_add(i as u64 * 7919)) % 1000) as f64 / 999.0)
    });
    SpdMatrix::from_symmetrized(&(&v * DMatrix::from_diagonal(&spectrum) * v.transpose())).unwrap()
}

mod spd_manifold {
    use super::*;

    #[test]
    fn geodesic_endpoints_up_to_p40() {
        for (i, p) in [2usize, 5, 10, 20, 40].into_iter().enumerate() {
            let q0 = random_spd(p, 10 + i as u64).unwrap();
            let q1 = random_spd(p, 20 + i as u64).unwrap();
            assert!(
                rel(
                    geodesic(&q0, &q1, t(0.0)).unwrap().as_matrix(),
                    q0.as_matrix()
                ) < 1e-10,
                "p={p}"
            );
            assert!(
                rel(
                    geodesic(&q0, &q1, t(1.0)).unwrap().as_matrix(),
                    q1.as_matrix()
                ) < 1e-10,
                "p={p}"
            );
        }
    }

    #[test]
    fn commuting_pairs_take_the_shortcut() {
        let v = random_orthogonal(6, 3);
        let d0 = DVector::from_row_slice(&[1.0, 2.0, 0.5, 3.0, 1.5, 0.2]);
        let d1 = DVector::from_row_slice(&[4.0, 0.3, 1.0, 2.0, 0.7, 5.0]);
        let q0 = SpdMatrix::from_symmetrized(&(&v * DMatrix::from_diagonal(&d0) * v.transpose()))
            .unwrap();
        let q1 = SpdMatrix::from_symmetrized(&(&v * DMatrix::from_diagonal(&d1) * v.transpose()))
            .unwrap();
        for tv in [0.1, 0.5, 0.8] {
            let g = geodesic(&q0, &q1, t(tv)).unwrap();
            let shortcut = spd_power(&q0, 1.0 - tv).unwrap().into_matrix()
                * spd_power(&q1, tv).unwrap().into_matrix();
            assert!(rel(g.as_matrix(), &shortcut) < 1e-9);
        }
    }

    #[test]
    fn log_det_interpolates_linearly() {
        let q0 = random_spd(7, 1).unwrap();
        let q1 = random_spd(7, 2).unwrap();
        let ld = |q: &SpdMatrix| q.eig().eigenvalues.iter().map(|l| l.ln()).sum::<f64>();
        for tv in [0.2, 0.6] {
            let g = geodesic(&q0, &q1, t(tv)).unwrap();
            assert!((ld(&g) - ((1.0 - tv) * ld(&q0) + tv * ld(&q1))).abs() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn geodesic_reversal(seed in any::<u64>(), p in 2usize..12, tv in 0.0f64..=1.0) {
            let q0 = bounded_spd(p, seed);
            let q1 = bounded_spd(p, seed ^ 0x5555);
            let a = geodesic(&q0, &q1, t(tv)).unwrap();
            let b = geodesic(&q1, &q0, t(1.0 - tv)).unwrap();
            prop_assert!(rel(a.as_matrix(), b.as_matrix()) < 1e-9);
            prop_assert!(is_spd(a.as_matrix(), 1e-9));
        }

        #[test]
        fn power_round_trip(seed in any::<u64>(), p in 1usize..12) {
            let q = bounded_spd(p, seed);
            for power in [0.5, 2.0] {
                let back = spd_power(&spd_power(&q, power).unwrap(), 1.0 / power).unwrap();
                prop_assert!(rel(back.as_matrix(), q.as_matrix()) < 1e-9);
                prop_assert!(is_spd(spd_power(&q, power).unwrap().as_matrix(), 1e-9));
            }
        }

        #[test]
        fn trace_normalize_targets_dimension(seed in any::<u64>(), p in 1usize..10, c in 1e-3f64..1e3) {
            let q = random_spd(p, seed).unwrap().scaled(c).unwrap();
            let n = trace_normalize(&q);
            prop_assert!((n.trace() - p as f64).abs() < 1e-12 * p as f64);
            prop_assert!(is_spd(n.as_matrix(), 1e-9));
        }
    }
}

mod symmetry_props {
    use super::*;

    fn circulant_pattern(q: &DMatrix<f64>, tol: f64) -> bool {
        let n = q.nrows();
        (0..n).all(|i| (0..n).all(|j| (q[(i, j)] - q[(0, (j + n - i) % n)]).abs() <= tol))
    }

    #[test]
    fn geodesic_between_invariant_points_is_invariant() {
        for group in families_dim8().unwrap() {
            for s in 0..10u64 {
                let q0 = random_invariant_spd(8, &group, 2 * s).unwrap();
                let q1 = random_invariant_spd(8, &group, 2 * s + 1).unwrap();
                for tv in [0.1, 0.25, 0.5, 0.75, 0.9] {
                    let g = geodesic(&q0, &q1, t(tv)).unwrap();
                    assert!(is_invariant(&g, &group, 1e-9).unwrap(), "{}", group.label());
                }
            }
        }
    }

    #[test]
    fn group_orders() {
        assert_eq!(make_circulant_group(6).unwrap().order(), 6);
        assert_eq!(make_persymmetric_group(6).unwrap().order(), 2);
        assert_eq!(make_proper_complex_group(3).unwrap().order(), 4);
        assert_eq!(make_proper_quaternion_group(3).unwrap().order(), 8);
    }

    #[test]
    fn circulant_membership_matches_entry_pattern() {
        let g = make_circulant_group(5).unwrap();
        for s in 0..20u64 {
            let q = if s % 2 == 0 {
                random_invariant_spd(5, &g, s).unwrap()
            } else {
                random_spd(5, s).unwrap()
            };
            let by_pattern = circulant_pattern(q.as_matrix(), 1e-9 * q.as_matrix().norm());
            assert_eq!(by_pattern, is_invariant(&q, &g, 1e-9).unwrap(), "seed {s}");
            assert_eq!(by_pattern, s % 2 == 0);
        }
    }

    #[test]
    fn projection_of_random_spd_is_invariant() {
        let g = make_proper_complex_group(4).unwrap();
        let q = project_to_invariant(&random_spd(8, 5).unwrap(), &g).unwrap();
        assert!(is_invariant(&q, &g, 1e-10).unwrap());
        assert!(is_spd(q.as_matrix(), 1e-9));
    }

    #[test]
    fn generator_check_distinguishes_invariance() {
        let g = make_proper_quaternion_group(2).unwrap();
        let inside = project_to_invariant(&random_spd(8, 8).unwrap(), &g).unwrap();
        assert!(generator_equivalence_check(&inside, 50, 1).unwrap());
        let outside = random_spd(8, 8).unwrap();
        assert!(!generator_equivalence_check(&outside, 50, 1).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn projection_idempotent(seed in any::<u64>(), family in 0usize..4) {
            let group = families_dim8().unwrap().swap_remove(family);
            let once = project_to_invariant(&random_spd(8, seed).unwrap(), &group).unwrap();
            let twice = project_to_invariant(&once, &group).unwrap();
            prop_assert!(rel(twice.as_matrix(), once.as_matrix()) < 1e-12);
            prop_assert!(commutation_residual(once.as_matrix(), &group).unwrap() < 1e-12);
        }

        #[test]
        fn replication_equals_projection(seed in any::<u64>(), family in 0usize..4, n in 1usize..30) {
            let group = families_dim8().unwrap().swap_remove(family);
            let truth = random_spd(8, seed).unwrap();
            let s = sample_elliptical(&EllipticalModel::new(truth, 2, seed).unwrap(), n).unwrap();
            let direct = symmetrize_samples(&s, &group).unwrap();
            prop_assert_eq!(direct.len(), group.order() * n);
            // plain outer-product averages, rank deficiency allowed
            let scatter = |m: &DMatrix<f64>| m * m.transpose() / m.ncols() as f64;
            let sc = scatter(s.matrix());
            let lhs = scatter(direct.matrix());
            let mut rhs = DMatrix::zeros(8, 8);
            for l in group.elements() {
                rhs += l * &sc * l.transpose();
            }
            rhs /= group.order() as f64;
            prop_assert!((lhs - &rhs).norm() <= 1e-12 * rhs.norm());
        }
    }
}

mod objective_props {
    use super::*;

    fn data(p: usize, n: usize, seed: u64) -> SampleSet {
        let truth = random_spd(p, seed).unwrap();
        sample_elliptical(&EllipticalModel::new(truth, 1, seed + 1).unwrap(), n).unwrap()
    }

    #[test]
    fn rotation_invariance() {
        let p = 5;
        let s = data(p, 40, 3);
        let q = random_spd(p, 4).unwrap();
        let u = random_orthogonal(p, 9);
        let rotated = SampleSet::from_columns(&u * s.matrix()).unwrap();
        let uq = SpdMatrix::from_symmetrized(&(&u * q.as_matrix() * u.transpose())).unwrap();
        let a = tyler_nll(&s, &q).unwrap();
        let b = tyler_nll(&rotated, &uq).unwrap();
        assert!((a - b).abs() < 1e-10);
        for beta in [0.2, 0.5, 1.0] {
            let a = mggd_nll(&s, &q, beta).unwrap();
            let b = mggd_nll(&rotated, &uq, beta).unwrap();
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn generic_matches_specific() {
        let s = data(4, 25, 5);
        let q = random_spd(4, 6).unwrap();
        let tyler = RhoObjective::tyler(4).unwrap();
        assert!((generic_nll(&s, &q, &tyler).unwrap() - tyler_nll(&s, &q).unwrap()).abs() < 1e-12);
        for beta in [0.2, 0.5, 1.0] {
            let m = RhoObjective::mggd(beta).unwrap();
            assert!(
                (generic_nll(&s, &q, &m).unwrap() - mggd_nll(&s, &q, beta).unwrap()).abs() < 1e-12
            );
        }
    }

    #[test]
    fn tyler_against_explicit_formula() {
        // independent route: explicit inverse and determinant
        let s = data(3, 10, 8);
        let q = random_spd(3, 9).unwrap();
        let inv = q.as_matrix().clone().try_inverse().unwrap();
        let n = s.len() as f64;
        let want = 3.0 / n
            * s.iter()
                .map(|x| (x.transpose() * &inv * &x)[(0, 0)].ln())
                .sum::<f64>()
            + q.as_matrix().determinant().ln();
        assert!((tyler_nll(&s, &q).unwrap() - want).abs() < 1e-11);
    }

    #[test]
    fn chord_inequality_many_pairs() {
        let grid = [0.25, 0.5, 0.75];
        for p in [2usize, 5, 10] {
            let s = data(p, 200, 100 + p as u64);
            for i in 0..100u64 {
                let q0 = random_spd(p, derive_seed(p as u64, 2 * i)).unwrap();
                let q1 = random_spd(p, derive_seed(p as u64, 2 * i + 1)).unwrap();
                assert!(
                    midpoint_convexity_check(|q| tyler_nll(&s, q), &q0, &q1, &grid, 1e-9).unwrap()
                );
                for beta in [0.2, 0.5, 1.0] {
                    assert!(midpoint_convexity_check(
                        |q| mggd_nll(&s, q, beta),
                        &q0,
                        &q1,
                        &grid,
                        1e-9
                    )
                    .unwrap());
                }
            }
        }
    }
}

mod estimator_props {
    use super::*;

    fn data(p: usize, n: usize, seed: u64) -> SampleSet {
        let truth = random_spd(p, seed).unwrap();
        sample_elliptical(&EllipticalModel::new(truth, 1, seed + 1).unwrap(), n).unwrap()
    }

    #[test]
    fn reapplying_the_map_at_convergence() {
        let s = data(5, 100, 1);
        for obj in [
            RhoObjective::tyler(5).unwrap(),
            RhoObjective::mggd(0.5).unwrap(),
        ] {
            let cfg = FixedPointConfig::for_objective(&obj);
            let r = fixed_point_estimate(&s, &obj, &cfg).unwrap();
            assert!(r.converged && r.iterations <= 200);
            let next = fixed_point_step(&s, &obj, &r.estimate).unwrap();
            let (a, b) = (trace_normalize(&next), trace_normalize(&r.estimate));
            assert!(rel(a.as_matrix(), b.as_matrix()) < 10.0 * cfg.tol);
        }
    }

    #[test]
    fn descent_on_constrained_runs() {
        let g = make_proper_quaternion_group(2).unwrap();
        for seed in 0..5u64 {
            let s = data(8, 20, seed);
            for obj in [
                RhoObjective::tyler(8).unwrap(),
                RhoObjective::mggd(0.3).unwrap(),
            ] {
                let r = constrained_estimate(&s, &g, &obj, &FixedPointConfig::for_objective(&obj))
                    .unwrap();
                assert!(r.nll_trace.windows(2).all(|w| w[1] - w[0] <= 1e-10));
                // trace is of the objective on the replicated samples
                let replicated = symmetrize_samples(&s, &g).unwrap();
                let last = generic_nll(&replicated, &r.estimate, &obj).unwrap();
                assert!((last - r.nll_trace.last().unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn every_constrained_iterate_is_invariant() {
        let g = make_proper_quaternion_group(2).unwrap();
        let s = data(8, 12, 77);
        let obj = RhoObjective::tyler(8).unwrap();
        let init = random_invariant_spd(8, &g, 5).unwrap();
        for k in 1..=15 {
            let cfg = FixedPointConfig::for_objective(&obj)
                .with_init(init.clone())
                .with_max_iter(k);
            let r = constrained_estimate(&s, &g, &obj, &cfg).unwrap();
            assert!(is_invariant(&r.estimate, &g, 1e-8).unwrap());
        }
    }

    #[test]
    fn constrained_equals_replicated_bitwise() {
        let g = make_proper_complex_group(3).unwrap();
        let s = data(6, 15, 4);
        let obj = RhoObjective::tyler(6).unwrap();
        let cfg = FixedPointConfig::for_objective(&obj);
        let a = constrained_estimate(&s, &g, &obj, &cfg).unwrap();
        let b = fixed_point_estimate(&symmetrize_samples(&s, &g).unwrap(), &obj, &cfg).unwrap();
        assert_eq!(a.estimate, b.estimate);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn quaternion_constrained_tyler_commutes_with_generators() {
        let g = make_proper_quaternion_group(2).unwrap();
        let s = data(8, 30, 12);
        let obj = RhoObjective::tyler(8).unwrap();
        let r = constrained_estimate(&s, &g, &obj, &FixedPointConfig::for_objective(&obj)).unwrap();
        assert!(commutation_residual(r.estimate.as_matrix(), &g).unwrap() < 1e-8);
        let psc = proper_sample_covariance(&s, &g).unwrap();
        assert!(is_invariant(&psc, &g, 1e-10).unwrap());
    }

    #[test]
    fn all_four_outputs() {
        let g = make_proper_quaternion_group(1).unwrap();
        let s = data(4, 50, 21);
        let obj = RhoObjective::tyler(4).unwrap();
        let four = estimate_all_four(&s, &g, &obj, &FixedPointConfig::for_objective(&obj));
        for (k, q) in &four {
            let q = q.as_ref().unwrap();
            assert!((q.trace() - 4.0).abs() < 1e-12, "{k}");
        }
        assert!(is_invariant(
            four[&EstimatorKind::ProperSampleCovariance]
                .as_ref()
                .unwrap(),
            &g,
            1e-9
        )
        .unwrap());
        assert!(is_invariant(
            four[&EstimatorKind::ProperTyler].as_ref().unwrap(),
            &g,
            1e-8
        )
        .unwrap());
    }

    #[test]
    fn sample_covariance_law_of_large_numbers() {
        let s = sample_elliptical(
            &EllipticalModel::gaussian(SpdMatrix::identity(4), 10),
            10_000,
        )
        .unwrap();
        let sc = sample_covariance(&s).unwrap();
        assert!((sc.as_matrix() - DMatrix::identity(4, 4)).norm() < 0.1);
    }
}

mod sampling_props {
    use super::*;
    use symcov::harness::estimation_error;

    #[test]
    fn gaussian_mode_recovers_scatter() {
        let scatter = random_spd(5, 31).unwrap();
        let s =
            sample_elliptical(&EllipticalModel::gaussian(scatter.clone(), 32), 100_000).unwrap();
        let sc = sample_covariance(&s).unwrap();
        assert!(rel(sc.as_matrix(), scatter.as_matrix()) < 0.02);
    }

    #[test]
    fn squared_norm_mean_matches_texture_dof() {
        for dof in [1u32, 3] {
            let scatter = random_spd(3, 40 + dof as u64).unwrap();
            let s = sample_elliptical(
                &EllipticalModel::new(scatter.clone(), dof, 50).unwrap(),
                100_000,
            )
            .unwrap();
            let norms: Vec<f64> = s.matrix().column_iter().map(|c| c.norm_squared()).collect();
            let m = norms.len() as f64;
            let mean = norms.iter().sum::<f64>() / m;
            let sd = (norms.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
            let expected = dof as f64 * scatter.trace();
            assert!(
                (mean - expected).abs() < 3.0 * sd / m.sqrt(),
                "dof {dof}: {mean} vs {expected}"
            );
        }
    }

    #[test]
    fn negating_samples_changes_nothing() {
        let g = make_persymmetric_group(6).unwrap();
        let s = sample_elliptical(
            &EllipticalModel::new(random_spd(6, 1).unwrap(), 1, 2).unwrap(),
            40,
        )
        .unwrap();
        let mut flipped = s.matrix().clone();
        for c in [0usize, 7, 39] {
            flipped.column_mut(c).neg_mut();
        }
        let flipped = SampleSet::from_columns(flipped).unwrap();
        let obj = RhoObjective::tyler(6).unwrap();
        let cfg = FixedPointConfig::for_objective(&obj);
        let a = estimate_all_four(&s, &g, &obj, &cfg);
        let b = estimate_all_four(&flipped, &g, &obj, &cfg);
        for k in EstimatorKind::ALL {
            let (x, y) = (a[&k].as_ref().unwrap(), b[&k].as_ref().unwrap());
            assert!(rel(x.as_matrix(), y.as_matrix()) < 1e-12, "{k}");
        }
    }

    #[test]
    fn tyler_ignores_the_texture() {
        let scatter = random_spd(6, 3).unwrap();
        let heavy =
            sample_elliptical(&EllipticalModel::new(scatter.clone(), 1, 4).unwrap(), 80).unwrap();
        let plain = sample_elliptical(&EllipticalModel::gaussian(scatter, 4), 80).unwrap();
        let obj = RhoObjective::tyler(6).unwrap();
        let cfg = FixedPointConfig::for_objective(&obj)
            .with_tol(1e-14)
            .with_max_iter(2000);
        let a = fixed_point_estimate(&heavy, &obj, &cfg).unwrap().estimate;
        let b = fixed_point_estimate(&plain, &obj, &cfg).unwrap().estimate;
        assert!(estimation_error(&a, &b).unwrap() < 1e-10);
    }

    #[test]
    fn quaternion_ground_truth_is_rotation_invariant() {
        let g = make_proper_quaternion_group(3).unwrap();
        let q = random_invariant_spd(12, &g, 6).unwrap();
        assert!(generator_equivalence_check(&q, 50, 7).unwrap());
    }
}
