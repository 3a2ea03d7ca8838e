use aircomp_core::beamforming::design_full;
use aircomp_core::channel::{generate_channels, RicianParams};
use aircomp_core::nomographic::{end_to_end, postprocess, preprocess, NomographicFunction, SensorData};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn registry(k: usize, weights: &[f64], betas: &[f64]) -> Vec<NomographicFunction> {
    vec![
        NomographicFunction::ArithmeticMean,
        NomographicFunction::WeightedSum {
            weights: weights[..k].to_vec(),
        },
        NomographicFunction::GeometricMean,
        NomographicFunction::Polynomial {
            weights: weights[..k].to_vec(),
            exponents: betas[..k].to_vec(),
        },
        NomographicFunction::EuclideanNorm,
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn nomographic_identity(
        d in prop::collection::vec(0.01f64..100.0, 1..30),
        weights in prop::collection::vec(-5.0f64..5.0, 30),
        betas in prop::collection::vec(0.1f64..4.0, 30),
    ) {
        let k = d.len();
        for f in registry(k, &weights, &betas) {
            let sum: f64 = d.iter().enumerate().map(|(i, &x)| f.pre(i, x, k).unwrap()).sum();
            let h = f.direct(&d).unwrap();
            let got = f.post(sum, k);
            prop_assert!((got - h).abs() <= 1e-10 * h.abs().max(1e-300) + 1e-300, "{f}: {got} vs {h}");
        }
    }

    #[test]
    fn standardized_symbols_round_trip(
        d in prop::collection::vec(0.5f64..20.0, 15),
    ) {
        let mut data = SensorData::new(DMatrix::from_row_slice(3, 5, &d)).unwrap();
        let funcs = registry(3, &[1.0, 2.0, 0.5], &[1.5, 2.0, 3.0]);
        data.standardize(&funcs).unwrap();
        let s = preprocess(&data, &funcs).unwrap();
        let sums: Vec<f64> = (0..5).map(|l| s.iter().map(|v| v[l]).sum()).collect();
        let r = postprocess(&sums, &funcs, &data).unwrap();
        prop_assert!(r.rel_error().iter().all(|&e| e < 1e-9));
    }
}

#[test]
fn noisy_pipeline_error_matches_analytic_mse() {
    let cs = generate_channels(RicianParams::default(), 10, 5, 8, 3).unwrap();
    let sigma2 = 0.1;
    let design = design_full(&cs, 5, 1.0, sigma2).unwrap();
    let data = SensorData::new(DMatrix::from_fn(10, 5, |i, j| 1.0 + (i * 5 + j) as f64 * 0.1)).unwrap();
    let funcs = vec![NomographicFunction::WeightedSum { weights: vec![1.0; 10] }; 5];
    let trials = 4000;
    let mut sq = 0.0;
    for seed in 0..trials {
        let r = end_to_end(&data, &funcs, &design, &cs, sigma2, seed).unwrap();
        sq += r.abs_error().iter().map(|e| e * e).sum::<f64>();
    }
    // only the real half of the complex noise reaches the computed values
    let per_function = sq / (trials as f64 * 5.0);
    let expected = sigma2 * design.receive.eta / 2.0;
    assert!(
        (per_function / expected - 1.0).abs() < 0.1,
        "{per_function} vs {expected}"
    );
}
