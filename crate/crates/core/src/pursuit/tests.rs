use super::*;
use crate::matrix::{dot_plain, DenseMatrix};
use crate::testutil::{instance, orthonormal_dict, rel_close, rng, gaussian_dict};

use proptest::prelude::*;

fn two_by_two() -> Dictionary {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Dictionary::new(DenseMatrix::from_columns(&[vec![1.0, 0.0], vec![s, s]]).unwrap()).unwrap()
}

#[test]
fn select_atom_cases() {
    let d = orthonormal_dict(8);
    assert_eq!(select_atom(&d, d.atom(5), &[]).unwrap(), 5);

    // |corr| 0.5 at atoms 2 and 7, smaller elsewhere.
    let mut r = vec![0.0; 8];
    r[2] = 0.5;
    r[7] = -0.5;
    r[3] = 0.25;
    assert_eq!(select_atom(&d, &r, &[]).unwrap(), 2);
    assert_eq!(select_atom(&d, &r, &[2]).unwrap(), 7);
}

#[test]
fn select_atom_matches_full_scan() {
    let (d, y, _, _) = instance(20, 50, 5, 7);
    let excluded = [3, 11, 40];
    let mut best = (f64::NEG_INFINITY, usize::MAX);
    for j in 0..50 {
        if excluded.contains(&j) {
            continue;
        }
        let c = dot_plain(d.atom(j), &y).abs();
        if c > best.0 {
            best = (c, j);
        }
    }
    assert_eq!(select_atom(&d, &y, &excluded).unwrap(), best.1);
}

#[test]
fn select_errors() {
    let d = orthonormal_dict(3);
    assert!(matches!(
        select_atom(&d, &[1.0, 1.0, 1.0], &[0, 1, 2]),
        Err(Error::ExhaustedDictionary)
    ));
    assert!(matches!(
        select_atom(&d, &[0.0; 3], &[]),
        Err(Error::ZeroResidual)
    ));
    assert!(select_block(&d, &[1.0; 3], &[], 0).is_err());
}

#[test]
fn select_block_cases() {
    let d = orthonormal_dict(10);
    let mut r = vec![0.0; 10];
    r[1] = 3.0;
    r[4] = 2.0;
    r[9] = 1.0;
    let mut got = select_block(&d, &r, &[], 2).unwrap();
    got.sort_unstable();
    assert_eq!(got, vec![1, 4]);
    // Fewer than c remaining: take them all.
    assert_eq!(select_block(&d, &r, &[0, 1, 2, 3, 5, 6, 7, 8], 4).unwrap(), vec![4, 9]);

    for seed in 0..20 {
        let (d, y, _, _) = instance(12, 30, 4, seed);
        assert_eq!(
            select_block(&d, &y, &[seed as usize], 1).unwrap(),
            vec![select_atom(&d, &y, &[seed as usize]).unwrap()]
        );
    }
}

#[test]
fn select_block_matches_subset_enumeration() {
    let (d, y, _, _) = instance(10, 14, 3, 3);
    let corr: Vec<f64> = (0..14).map(|j| dot_plain(d.atom(j), &y)).collect();
    let mut best = (f64::NEG_INFINITY, vec![]);
    for a in 0..14 {
        for b in a + 1..14 {
            for c in b + 1..14 {
                let v = corr[a].powi(2) + corr[b].powi(2) + corr[c].powi(2);
                if v > best.0 {
                    best = (v, vec![a, b, c]);
                }
            }
        }
    }
    let mut got = select_block(&d, &y, &[], 3).unwrap();
    got.sort_unstable();
    assert_eq!(got, best.1);
}

#[test]
fn trivial_recoveries() {
    let d = orthonormal_dict(6);
    let mut y = vec![0.0; 6];
    y[2] = 5.0;
    let cfg = SolverConfig::default().with_max_iterations(1);
    for m in [Method::OmpNaive, Method::OmpQr, Method::OmpSr, Method::Gomp, Method::Bsr] {
        let res = solve(m, &d, &y, &cfg).unwrap();
        assert_eq!(res.selection_order, vec![2], "{m}");
        assert!((res.coefficients.get(2) - 5.0).abs() < 1e-15);
        assert_eq!(res.final_residual_norm(), 0.0);
    }

    for m in Method::ALL {
        let res = solve(m, &d, &[0.0; 6], &SolverConfig::default()).unwrap();
        assert_eq!(res.iterations_used, 0);
        assert_eq!(res.halted_by, HaltReason::Threshold);
    }
}

#[test]
fn sr_two_atom_example() {
    let d = two_by_two();
    let res = omp_sr(&d, &[1.0, 1.0], &SolverConfig::default()).unwrap();
    assert_eq!(res.selection_order, vec![1]);
    assert!((res.selection_coefficients[0] - 2f64.sqrt()).abs() < 1e-15);
    assert_eq!(res.iterations_used, 1);
    assert!(res.final_residual_norm() < 1e-15);
}

#[test]
fn sr_orthonormal_has_no_backtracking() {
    let d = orthonormal_dict(8);
    let y = [0.0, 3.0, 0.0, -1.0, 0.0, 0.5, 2.0, 0.0];
    let mut e = sr::SuccessiveRegression::new(&d, &y, false);
    let mut ctr = FlopCounter::new();
    for j in [1, 6, 3, 5] {
        e.absorb(&[j], &mut ctr).unwrap();
    }
    for (k, &j) in [1, 6, 3, 5].iter().enumerate() {
        assert_eq!(e.coefficients()[k], y[j]);
    }
    let res = omp_sr(&d, &y, &SolverConfig::default()).unwrap();
    assert_eq!(res.selection_order, vec![1, 6, 3, 5]);
    for (&j, &b) in res.selection_order.iter().zip(&res.selection_coefficients) {
        assert_eq!(b, y[j]);
    }
}

#[test]
fn bsr_orthonormal_block_coefficients_are_correlations() {
    let d = orthonormal_dict(9);
    let y = [0.0, 3.0, 0.0, -1.0, 0.0, 0.5, 2.0, 0.0, 4.0];
    for c in 1..=4 {
        let res = bsr(&d, &y, &SolverConfig::default().with_block_size(c)).unwrap();
        for (&j, &b) in res.selection_order.iter().zip(&res.selection_coefficients) {
            assert!((b - y[j]).abs() < 1e-14);
        }
    }
}

#[test]
fn gomp_orthonormal_two_blocks() {
    let d = orthonormal_dict(10);
    let mut y = vec![0.0; 10];
    for (j, v) in [(0, 4.0), (3, -3.0), (5, 2.0), (8, 1.0)] {
        y[j] = v;
    }
    let res = gomp(&d, &y, &SolverConfig::default().with_block_size(2)).unwrap();
    assert_eq!(res.iterations_used, 2);
    assert_eq!(res.blocks(), vec![&[0, 3][..], &[5, 8][..]]);
    assert!(res.final_residual_norm() < 1e-14);
}

#[test]
fn single_atom_solvers_reject_blocks() {
    let (d, y, _, _) = instance(8, 12, 2, 1);
    let cfg = SolverConfig::default().with_block_size(2);
    for m in [Method::OmpNaive, Method::OmpQr, Method::OmpSr] {
        let err = solve(m, &d, &y, &cfg).unwrap_err();
        assert!(matches!(err.error, Error::Parameter(_)));
    }
    assert!(gomp(&d, &y, &cfg).is_ok());
}

#[test]
fn config_validation() {
    let (d, y, _, _) = instance(8, 12, 2, 1);
    for cfg in [
        SolverConfig::default().with_block_size(0),
        SolverConfig::default().with_block_size(13),
        SolverConfig::default().with_max_iterations(13),
        SolverConfig::default().with_threshold(-1.0),
        SolverConfig::default().with_oracle_support(vec![12]),
    ] {
        assert!(bsr(&d, &y, &cfg).is_err());
    }
    assert!(matches!(
        omp_naive(&d, &y[..7], &SolverConfig::default()).unwrap_err().error,
        Error::Dimension(_)
    ));
}

#[test]
fn rank_collapse_carries_partial_result() {
    // Three atoms in the plane: the third block member is dependent.
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let d = Dictionary::new(
        DenseMatrix::from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![s, s]]).unwrap(),
    )
    .unwrap();
    let y = [1.0, 0.3];
    let cfg = SolverConfig::default().with_block_size(3).with_threshold(0.0);
    let fail = bsr(&d, &y, &cfg).unwrap_err();
    assert!(matches!(fail.error, Error::RankDeficient { .. }), "{}", fail.error);
    assert_eq!(fail.partial.iterations_used, 0);
    assert!(gomp(&d, &y, &cfg).unwrap_err().error.is_numerical());
}

#[test]
fn budget_and_oracle_halts() {
    let (d, y, _, support) = instance(32, 64, 4, 11);
    let res = omp_sr(&d, &y, &SolverConfig::default().with_max_iterations(2)).unwrap();
    assert_eq!((res.iterations_used, res.halted_by), (2, HaltReason::Budget));

    let res = omp_sr(
        &d,
        &y,
        &SolverConfig::default().with_oracle_support(support.clone()),
    )
    .unwrap();
    assert_eq!(res.found(&support), 4);
    assert!(matches!(res.halted_by, HaltReason::Oracle | HaltReason::Threshold));
}

#[test]
fn naive_recovers_small_noiseless_instance() {
    let (d, y, x, support) = instance(32, 128, 6, 2024);
    let res = omp_naive(&d, &y, &SolverConfig::default()).unwrap();
    assert_eq!(res.iterations_used, 6);
    let mut sel = res.selection_order.clone();
    sel.sort_unstable();
    assert_eq!(sel, support);
    let est = res.coefficients.to_dense();
    let err: f64 = est.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum();
    let nx: f64 = x.iter().map(|v| v * v).sum();
    assert!(err / nx < 1e-11);
}

#[test]
fn qr_back_substitution_costs_t_squared() {
    let (d, y, _, _) = instance(32, 128, 6, 5);
    let res = omp_qr(&d, &y, &SolverConfig::default()).unwrap();
    for (i, rec) in res.per_iteration.iter().enumerate() {
        let t = (i + 1) as u64;
        assert_eq!(rec.kernel_flops.get(Kernel::BackSubstitute).total(), t * t);
        assert_eq!(rec.kernel_flops.get(Kernel::Project).total(), 2 * 32 - 1);
    }
}

#[test]
fn sr_kernel_counts_default_mode() {
    let (n, dd) = (24u64, 60u64);
    let (d, y, _, _) = instance(n as usize, dd as usize, 8, 9);
    let res = omp_sr(&d, &y, &SolverConfig::default().with_max_iterations(8)).unwrap();
    assert_eq!(res.iterations_used, 8);
    for (i, rec) in res.per_iteration.iter().enumerate() {
        let t = (i + 1) as u64;
        let k = &rec.kernel_flops;
        assert_eq!(k.get(Kernel::GammaInner).total(), (t - 1) * (2 * n - 1));
        assert_eq!(k.get(Kernel::GammaDivide).total(), t - 1);
        assert_eq!(k.get(Kernel::Orthogonalize).total(), (t - 1) * 2 * n);
        assert_eq!(k.get(Kernel::Beta).total(), 4 * n - 1);
        assert_eq!(k.get(Kernel::Backtrack).total(), t * t - t);
        assert_eq!(k.get(Kernel::Selection).total(), (dd - (t - 1)) * (2 * n - 1));
    }
    assert_eq!(res.norm_evaluations, 8);
}

#[test]
fn sr_kernel_counts_with_ones_regressor_match_cost_model() {
    let (n, dd) = (24u64, 60u64);
    let (d, y, _, _) = instance(n as usize, dd as usize, 8, 9);
    let cfg = SolverConfig::default()
        .with_max_iterations(8)
        .with_ones_regressor(true);
    let res = omp_sr(&d, &y, &cfg).unwrap();
    for (i, rec) in res.per_iteration.iter().enumerate() {
        let t = (i + 1) as u64;
        let k = &rec.kernel_flops;
        assert_eq!(k.sum_of(&sr_core_kernels()), t * (2 * n - 1) + 4 * n - 1 + t * t - t);
        assert_eq!(
            k.sum_of(&sr_core_kernels()) + k.get(Kernel::GammaDivide).total(),
            cost_model(Method::OmpSr, t, n, dd).unwrap()
        );
    }
}

#[test]
fn sr_directions_are_orthogonal() {
    let (d, y, _, _) = instance(40, 90, 10, 12);
    let res = omp_naive(&d, &y, &SolverConfig::default()).unwrap();
    let mut e = sr::SuccessiveRegression::new(&d, &y, false);
    let mut ctr = FlopCounter::new();
    for &j in &res.selection_order {
        e.absorb(&[j], &mut ctr).unwrap();
    }
    let z = e.directions();
    for i in 0..z.len() {
        for j in 0..i {
            assert!(dot_plain(&z[i], &z[j]).abs() <= 1e-8 * crate::matrix::norm2(&z[i]) * crate::matrix::norm2(&z[j]));
        }
    }
}

#[test]
fn equivalence_on_seeded_instances() {
    for seed in 0..25 {
        let (d, y, _, _) = instance(48, 160, 3 + (seed as usize % 10), 500 + seed);
        let cfg = SolverConfig::default();
        let naive = omp_naive(&d, &y, &cfg).unwrap();
        let qr = omp_qr(&d, &y, &cfg).unwrap();
        let sr = omp_sr(&d, &y, &cfg).unwrap();
        let b1 = bsr(&d, &y, &cfg).unwrap();
        assert_eq!(naive.selection_order, qr.selection_order);
        assert_eq!(naive.selection_order, sr.selection_order);
        assert_eq!(sr.selection_order, b1.selection_order);
        let scale = sr.selection_coefficients.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in sr.selection_coefficients.iter().zip(&b1.selection_coefficients) {
            assert!(rel_close(*a, *b, 1e-12, 1e-12 * scale), "seed {seed}: {a} vs {b}");
        }
        let floor = 1e-12 * naive.initial_residual_norm;
        for (a, b) in naive.residual_trace().iter().zip(sr.residual_trace()) {
            assert!(rel_close(*a, b, 1e-9, floor), "{a} vs {b}");
        }
    }
}

#[test]
fn oracle_halt_before_threshold() {
    let mut r = rng(4);
    let d = gaussian_dict(30, 60, &mut r);
    let y: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
    let res = bsr(
        &d,
        &y,
        &SolverConfig::default().with_block_size(2).with_oracle_support(vec![]),
    )
    .unwrap();
    assert_eq!((res.iterations_used, res.halted_by), (0, HaltReason::Oracle));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn solver_invariants(seed in 0u64..10_000, k in 1usize..10, c in 1usize..5, m in 0usize..5) {
        let method = Method::ALL[m];
        let c = if method.is_blocked() { c } else { 1 };
        let (d, y, _, _) = instance(24, 48, k, seed);
        let res = solve(method, &d, &y, &SolverConfig::default().with_block_size(c)).unwrap();
        let ny = crate::matrix::norm2(&y);

        let mut seen = res.selection_order.clone();
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen.len(), res.selection_order.len());

        let trace = res.residual_trace();
        for w in trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * ny);
        }
        for j in res.coefficients.support() {
            prop_assert!(res.selection_order.contains(j));
        }

        let est = res.coefficients.to_dense();
        let fit = d.synthesize(&est).unwrap();
        let r: Vec<f64> = y.iter().zip(&fit).map(|(a, b)| a - b).collect();
        for &j in &res.selection_order {
            prop_assert!(dot_plain(d.atom(j), &r).abs() <= 1e-8 * ny);
        }
        for (i, b) in res.blocks().iter().enumerate() {
            if i + 1 < res.iterations_used {
                prop_assert_eq!(b.len(), c);
            }
        }
    }
}
