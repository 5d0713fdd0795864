//! Gram matrix properties: validity, permutation equivariance, and
//! invariance under global phase.

mod common;

use common::TestRng;
use num_complex::Complex;
use qkernel::circuit::{enumerate_layers, CircuitDescriptor, ParamVector};
use qkernel::kernelmat::{circuit_states, gram_from_states, gram_matrix};
use qkernel::qstate::{FeatureVector, StateVector};

fn random_points(rng: &mut TestRng, count: usize, dim: usize) -> Vec<FeatureVector<f64>> {
    (0..count)
        .map(|_| {
            FeatureVector::new(
                (0..dim)
                    .map(|_| rng.range(0.0, std::f64::consts::TAU))
                    .collect(),
            )
        })
        .collect()
}

fn random_descriptor(rng: &mut TestRng, n: usize, depth: usize) -> CircuitDescriptor {
    let layers = enumerate_layers(n).unwrap();
    let mut descriptor = CircuitDescriptor::empty(n).unwrap();
    for _ in 0..depth {
        descriptor = descriptor
            .with_layer(layers[rng.below(layers.len())].clone())
            .unwrap();
    }
    descriptor
}

#[test]
fn random_grams_pass_validity_checks() {
    let mut rng = TestRng::new(0x6AA);
    for trial in 0..25 {
        let n = 1 + rng.below(4);
        let depth = 1 + rng.below(6);
        let descriptor = random_descriptor(&mut rng, n, depth);
        let theta = ParamVector::new(
            (0..descriptor.param_count())
                .map(|_| rng.range(0.0, std::f64::consts::TAU))
                .collect(),
        );
        let count = 8 + rng.below(8);
        let points = random_points(&mut rng, count, n);
        let gram = gram_matrix(&points, &descriptor, &theta).unwrap();
        gram.validate_gram(1e-10, 1e-10, -1e-8)
            .unwrap_or_else(|e| panic!("trial {trial}: {e}"));
    }
}

#[test]
fn permuting_points_permutes_the_gram() {
    let mut rng = TestRng::new(0xBEEF);
    let n = 3;
    let descriptor = random_descriptor(&mut rng, n, 3);
    let theta = ParamVector::ones(descriptor.param_count());
    let points = random_points(&mut rng, 7, n);
    let gram = gram_matrix(&points, &descriptor, &theta).unwrap();

    // An arbitrary fixed permutation.
    let perm = [3usize, 0, 6, 1, 5, 2, 4];
    let permuted: Vec<FeatureVector<f64>> = perm.iter().map(|i| points[*i].clone()).collect();
    let gram_p = gram_matrix(&permuted, &descriptor, &theta).unwrap();
    for i in 0..7 {
        for j in 0..7 {
            assert_eq!(gram_p.get(i, j), gram.get(perm[i], perm[j]));
        }
    }
}

#[test]
fn global_phase_leaves_the_gram_unchanged() {
    let mut rng = TestRng::new(0xFACE);
    let n = 2;
    let descriptor = random_descriptor(&mut rng, n, 4);
    let theta = ParamVector::ones(descriptor.param_count());
    let points = random_points(&mut rng, 6, n);
    let states = circuit_states(&points, &descriptor, &theta).unwrap();
    let gram = gram_from_states(&states).unwrap();

    let shifted: Vec<StateVector<f64>> = states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let phase = Complex::from_polar(1.0, 0.7 + 0.4 * i as f64);
            StateVector::from_amplitudes(
                s.amplitudes().iter().map(|a| a * phase).collect(),
            )
            .unwrap()
        })
        .collect();
    let gram_shifted = gram_from_states(&shifted).unwrap();
    for i in 0..6 {
        for j in 0..6 {
            assert!(
                (gram.get(i, j) - gram_shifted.get(i, j)).abs() < 1e-12,
                "({i},{j})"
            );
        }
    }
}

#[test]
fn encoding_only_gram_matches_cosine_closed_form() {
    let mut rng = TestRng::new(0xC05);
    for n in 1..=4usize {
        let descriptor = CircuitDescriptor::empty(n).unwrap();
        let points = random_points(&mut rng, 10, n);
        let gram = gram_matrix(&points, &descriptor, &ParamVector::ones(0)).unwrap();
        for i in 0..points.len() {
            for j in 0..points.len() {
                let expected: f64 = (0..n)
                    .map(|k| (points[i][k] - points[j][k]).cos().powi(2))
                    .product();
                assert!(
                    (gram.get(i, j) - expected).abs() < 1e-10,
                    "n={n} ({i},{j})"
                );
            }
        }
    }
}
