mod support;

use aircomp_core::linalg::{
    compact_svd, herm_eig, min_eigenvalue, orthonormality_defect, psd_project, ComplexMatrix, DEFAULT_RANK_TOL,
};
use aircomp_core::random::{complex_gaussian, stream_rng};
use proptest::prelude::*;
use rand::Rng;
use support::random_stiefel;

fn hermitian(seed: u64, n: usize) -> ComplexMatrix {
    let mut rng = stream_rng(seed, 1);
    let m = complex_gaussian(&mut rng, n, n, 1.0);
    (&m + m.adjoint()).scale(0.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn svd_invariants(seed in any::<u64>(), r in 1usize..7, c in 1usize..7) {
        let mut rng = stream_rng(seed, 0);
        let m = complex_gaussian(&mut rng, r, c, 1.0);
        let svd = compact_svd(&m, DEFAULT_RANK_TOL).unwrap();
        prop_assert!(orthonormality_defect(&svd.u) < 1e-10);
        prop_assert!(orthonormality_defect(&svd.v) < 1e-10);
        prop_assert!(svd.singular_values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert_eq!(svd.rank, r.min(c));
        prop_assert!((svd.reconstruct() - &m).norm() / m.norm() < 1e-9);
    }

    #[test]
    fn eig_round_trips_synthesized_spectra(seed in any::<u64>(), n in 1usize..7) {
        let mut rng = stream_rng(seed, 0);
        let q = random_stiefel(&mut rng, n, n);
        let mut spectrum: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let d = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            n, spectrum.iter().map(|&x| num_complex::Complex64::new(x, 0.0))));
        let g = &q * d * q.adjoint();
        let g = (&g + g.adjoint()).scale(0.5);
        let e = herm_eig(&g).unwrap();
        spectrum.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in e.eigenvalues.iter().zip(&spectrum) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        for i in 0..n {
            let v = e.eigenvectors.column(i);
            prop_assert!((&g * v - v * num_complex::Complex64::new(e.eigenvalues[i], 0.0)).norm() < 1e-9);
        }
    }

    /// Optimality conditions of the Frobenius-nearest PSD matrix:
    /// `P ⪰ 0`, `P − M ⪰ 0`, `P (P − M) = 0`.
    #[test]
    fn psd_projection_is_nearest(seed in any::<u64>(), n in 1usize..7) {
        let m = hermitian(seed, n);
        let p = psd_project(&m).unwrap();
        let scale = m.norm().max(1.0);
        prop_assert!(min_eigenvalue(&p).unwrap() >= -1e-10 * scale);
        let gap = &p - &m;
        prop_assert!(min_eigenvalue(&((&gap + gap.adjoint()).scale(0.5))).unwrap() >= -1e-10 * scale);
        prop_assert!((&p * &gap).norm() < 1e-9 * scale * scale);
        prop_assert!((psd_project(&p).unwrap() - &p).norm() < 1e-10 * scale);
    }
}
