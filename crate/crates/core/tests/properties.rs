use proptest::prelude::*;

use pse_core::eigensolve::{eigendecompose, residual_check, DEFAULT_EIG_TOL};
use pse_core::gbz::{analytic_alpha, analytic_beta, roots_from_energy};
use pse_core::lattice::{build_ring, build_segmented_ring, RingSpec};
use pse_core::spectra::{analytic_ring_spectrum, match_spectra, minkowski_sum};
use pse_core::{Complex64, ComplexMatrix};

fn ring_params() -> impl Strategy<Value = (usize, usize, f64)> {
    (1usize..9, 1usize..9, prop_oneof![0.2f64..0.9, 1.1f64..5.0])
}

fn random_matrix() -> impl Strategy<Value = ComplexMatrix> {
    (1usize..=12).prop_flat_map(|n| {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n).prop_map(move |v| {
            let rows: Vec<Vec<Complex64>> = v
                .chunks(n)
                .map(|r| r.iter().map(|&(a, b)| Complex64::new(a, b)).collect())
                .collect();
            ComplexMatrix::from_rows(&rows).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vieta_identities(re in -4.0f64..4.0, im in -4.0f64..4.0, t in 0.1f64..10.0) {
        let e = Complex64::new(re, im);
        let r = roots_from_energy(e, t).unwrap();
        let scale = 1.0 + e.norm() + t;
        prop_assert!((r.alpha1 + r.alpha2 - e).norm() < 1e-12 * scale);
        prop_assert!((r.alpha1 * r.alpha2 - t).norm() < 1e-12 * scale);
        prop_assert!((t * (r.beta1 + r.beta2) - e).norm() < 1e-12 * scale);
        prop_assert!((t * r.beta1 * r.beta2 - 1.0).norm() < 1e-12 * scale);
        prop_assert!(r.alpha1.norm() >= r.alpha2.norm());
    }

    #[test]
    fn analytic_roots_close_the_ring((n, m, t) in ring_params(), k in 0usize..64) {
        let g = n + m;
        let k = (k % g) as i64;
        let a = analytic_alpha(n, m, t, k).unwrap();
        let b = analytic_beta(n, m, t, k).unwrap();
        // alpha^Gamma = t^N and beta^Gamma = t^-M for every momentum
        prop_assert!((a.powu(g as u32) - t.powi(n as i32)).norm() < 1e-10 * t.powi(n as i32));
        prop_assert!((b.powu(g as u32) - t.powi(-(m as i32))).norm() < 1e-10 * t.powi(-(m as i32)));
        // both chains share the energy
        prop_assert!((a + t / a - (t * b + 1.0 / b)).norm() < 1e-10 * (1.0 + t));
    }

    #[test]
    fn degenerate_kron_sums_converge(n1 in 1usize..6, n2 in 1usize..6, t1 in 0.3f64..4.0, t2 in 0.3f64..4.0) {
        let a = build_ring(&RingSpec::new(n1, n1, t1).unwrap()).unwrap();
        let b = build_ring(&RingSpec::new(n2, n2, t2).unwrap()).unwrap();
        let sys = eigendecompose(&ComplexMatrix::kron_sum(&a, &b), DEFAULT_EIG_TOL).unwrap();
        prop_assert!(sys.worst_residual() < 1e-12);
    }

    #[test]
    fn analytic_spectrum_sums_to_zero((n, m, t) in ring_params()) {
        let s = analytic_ring_spectrum(n, m, t).unwrap();
        let sum: Complex64 = s.values.iter().sum();
        let scale: f64 = s.values.iter().map(|z| z.norm()).sum();
        prop_assert!(sum.norm() < 1e-12 * scale.max(1.0));
    }

    #[test]
    fn swapping_chain_lengths_conjugates_spectrum((n, m, t) in ring_params()) {
        let a = analytic_ring_spectrum(n, m, t).unwrap();
        let b = analytic_ring_spectrum(m, n, t).unwrap();
        let conj: Vec<Complex64> = b.values.iter().map(|z| z.conj()).collect();
        prop_assert!(match_spectra(&a.values, &conj, 1e-10).is_complete());
    }

    #[test]
    fn ring_equals_two_segment_ring((n, m, t) in ring_params()) {
        let spec = RingSpec::new(n, m, t).unwrap();
        let a = build_ring(&spec).unwrap();
        let b = build_segmented_ring(&spec.as_segmented()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn transpose_inverts_ratio((n, m, t) in ring_params()) {
        let h = build_ring(&RingSpec::new(n, m, t).unwrap()).unwrap();
        let inv = build_ring(&RingSpec::new(n, m, 1.0 / t).unwrap()).unwrap();
        prop_assert!(h.transpose().max_abs_diff(&inv.scaled(t)) < 1e-12 * t.max(1.0));
    }

    #[test]
    fn reciprocal_ring_is_hermitian_with_real_spectrum(n in 1usize..9, m in 1usize..9) {
        let h = build_ring(&RingSpec::new(n, m, 1.0).unwrap()).unwrap();
        prop_assert_eq!(h.conj_transpose(), h.clone());
        let sys = eigendecompose(&h, DEFAULT_EIG_TOL).unwrap();
        for e in &sys.eigenvalues {
            prop_assert!(e.im.abs() < 1e-10);
        }
    }

    #[test]
    fn ring_has_zero_diagonal((n, m, t) in ring_params()) {
        let h = build_ring(&RingSpec::new(n, m, t).unwrap()).unwrap();
        for i in 0..h.dim() {
            prop_assert_eq!(h[(i, i)], Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn numeric_ring_spectrum_matches_closed_form((n, m, t) in ring_params()) {
        let h = build_ring(&RingSpec::new(n, m, t).unwrap()).unwrap();
        let sys = eigendecompose(&h, DEFAULT_EIG_TOL).unwrap();
        let s = analytic_ring_spectrum(n, m, t).unwrap();
        prop_assert!(match_spectra(&sys.eigenvalues, &s.values, 1e-8).is_complete());
    }

    #[test]
    fn kron_sum_spectrum_is_minkowski_sum(
        (n1, m1, t1) in (1usize..4, 1usize..4, 1.1f64..3.0),
        (n2, m2, t2) in (1usize..4, 1usize..4, 1.1f64..3.0),
    ) {
        let a = build_ring(&RingSpec::new(n1, m1, t1).unwrap()).unwrap();
        let b = build_ring(&RingSpec::new(n2, m2, t2).unwrap()).unwrap();
        let sa = eigendecompose(&a, DEFAULT_EIG_TOL).unwrap();
        let sb = eigendecompose(&b, DEFAULT_EIG_TOL).unwrap();
        let s2 = eigendecompose(&ComplexMatrix::kron_sum(&a, &b), DEFAULT_EIG_TOL).unwrap();
        let mk = minkowski_sum(&sa.eigenvalues, &sb.eigenvalues);
        prop_assert!(match_spectra(&s2.eigenvalues, &mk.values, 1e-8).is_complete());
    }

    #[test]
    fn random_matrix_invariants(h in random_matrix()) {
        let sys = eigendecompose(&h, 1e-9).unwrap();
        let n = h.dim() as f64;
        prop_assert!(residual_check(&h, &sys).unwrap() < 1e-9);
        let sum: Complex64 = sys.eigenvalues.iter().sum();
        prop_assert!((sum - h.trace()).norm() < 1e-10 * n);
        let prod: Complex64 = sys.eigenvalues.iter().product();
        let det = h.determinant();
        prop_assert!((prod - det).norm() < 1e-9 * det.norm().max(1.0));
        let again = eigendecompose(&h, 1e-9).unwrap();
        prop_assert_eq!(sys.eigenvalues, again.eigenvalues);
        prop_assert_eq!(sys.vectors, again.vectors);
    }
}
