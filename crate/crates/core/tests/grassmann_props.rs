mod support;

use aircomp_core::grassmann::{
    dist_geodesic, dist_p2, dist_p2_matrix, dist_pf, dist_pf_matrix, p2_lambda_identity, principal_angles, Subspace,
};
use aircomp_core::random::stream_rng;
use support::{principal_cosines_by_projection, random_stiefel};

fn pair(seed: u64, n: usize, m: usize) -> (Subspace, Subspace) {
    let mut rng = stream_rng(seed, 0);
    (
        Subspace::new(random_stiefel(&mut rng, n, m)).unwrap(),
        Subspace::new(random_stiefel(&mut rng, n, m)).unwrap(),
    )
}

#[test]
fn inequality_chain_on_random_pairs() {
    for seed in 0..1000 {
        let m = 1 + (seed as usize % 4);
        let (x, y) = pair(seed, m + 1 + (seed as usize % 5), m);
        let g = dist_geodesic(&x, &y).unwrap();
        let f = dist_pf(&x, &y).unwrap();
        let p = dist_p2(&x, &y).unwrap();
        assert!(
            g >= f - 1e-12 && f >= p - 1e-12 && p >= f / (m as f64).sqrt() - 1e-12,
            "seed {seed}"
        );
    }
}

#[test]
fn distances_are_symmetric() {
    for seed in 0..200 {
        let (x, y) = pair(seed, 6, 3);
        assert!((dist_p2(&x, &y).unwrap() - dist_p2(&y, &x).unwrap()).abs() < 1e-12);
        assert!((dist_pf(&x, &y).unwrap() - dist_pf(&y, &x).unwrap()).abs() < 1e-12);
        assert!((dist_geodesic(&x, &y).unwrap() - dist_geodesic(&y, &x).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn matrix_forms_and_lambda_identity() {
    for seed in 0..300 {
        let (x, y) = pair(seed, 7, 3);
        assert!((dist_p2(&x, &y).unwrap() - dist_p2_matrix(&x, &y).unwrap()).abs() < 1e-9);
        assert!((dist_pf(&x, &y).unwrap() - dist_pf_matrix(&x, &y).unwrap()).abs() < 1e-10);
        let (a, b) = p2_lambda_identity(&x, &y).unwrap();
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn cosines_match_variational_oracle() {
    let mut rng = stream_rng(77, 9);
    for seed in 0..20 {
        let mut r = stream_rng(seed, 3);
        let x = random_stiefel(&mut r, 6, 2);
        let y = random_stiefel(&mut r, 6, 2);
        let angles = principal_angles(&Subspace::new(x.clone()).unwrap(), &Subspace::new(y.clone()).unwrap()).unwrap();
        let oracle = principal_cosines_by_projection(&mut rng, &x, &y);
        for (t, c) in angles.angles.iter().zip(&oracle) {
            assert!((t.cos() - c).abs() < 1e-8, "seed {seed}: {} vs {c}", t.cos());
        }
    }
}
