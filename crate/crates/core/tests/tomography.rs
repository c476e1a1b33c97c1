use nalgebra::SymmetricEigen;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use starkshield::emitter::PulseAxis;
use starkshield::linalg::{min_eigenvalue4, projector, trace2, trace_distance, Mat2, Mat4};
use starkshield::tomography::{
    apply_chi, chi_from_io, chi_of_unitary, input_densities, process_fidelity, rotation, state_tomography,
};
use starkshield::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_matrix(rng: &mut ChaCha8Rng) -> Mat2 {
    Mat2::from_fn(|_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

/// Kraus operators `G_k S^{-1/2}` with `S = sum G_k^dag G_k`: a random CPTP map.
fn random_channel(rng: &mut ChaCha8Rng, rank: usize) -> Vec<Mat2> {
    let g: Vec<Mat2> = (0..rank).map(|_| random_matrix(rng)).collect();
    let s = g.iter().fold(Mat2::zeros(), |acc, k| acc + k.adjoint() * k);
    let eig = SymmetricEigen::new(s);
    let inv_sqrt = Mat2::from_diagonal(&eig.eigenvalues.map(|v| c(1.0 / v.sqrt(), 0.0)));
    let s_inv_sqrt = eig.eigenvectors * inv_sqrt * eig.eigenvectors.adjoint();
    g.into_iter().map(|k| k * s_inv_sqrt).collect()
}

fn apply_kraus(kraus: &[Mat2], rho: &Mat2) -> Mat2 {
    kraus.iter().fold(Mat2::zeros(), |acc, k| acc + k * rho * k.adjoint())
}

fn random_state(rng: &mut ChaCha8Rng) -> Mat2 {
    let a = random_matrix(rng);
    let m = a * a.adjoint();
    m.unscale(trace2(&m).re)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reconstruction_reproduces_random_channels(seed in any::<u64>(), rank in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kraus = random_channel(&mut rng, rank);
        let inputs = input_densities();
        let outputs = inputs.map(|rho| apply_kraus(&kraus, &rho));
        let chi = chi_from_io(&inputs, &outputs).unwrap();
        prop_assert!(min_eigenvalue4(&chi.projected) >= -1e-10);
        for _ in 0..20 {
            let rho = random_state(&mut rng);
            let d = trace_distance(&apply_chi(&chi.projected, &rho), &apply_kraus(&kraus, &rho));
            prop_assert!(d < 1e-8, "trace distance {d}");
        }
    }

    #[test]
    fn fidelity_is_a_probability(seed in any::<u64>(), theta in 0.01f64..std::f64::consts::TAU) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kraus = random_channel(&mut rng, 3);
        let inputs = input_densities();
        let outputs = inputs.map(|rho| apply_kraus(&kraus, &rho));
        let chi = chi_from_io(&inputs, &outputs).unwrap();
        let target = chi_of_unitary(&rotation(PulseAxis::X, theta));
        let f = process_fidelity(&chi.projected, &target).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((process_fidelity(&target, &target).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shot_tomography_is_physical(seed in any::<u64>(), shots in 3usize..5000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_state(&mut rng);
        let est = state_tomography(&rho, shots, false, seed).unwrap();
        prop_assert!((trace2(&est) - c(1.0, 0.0)).norm() < 1e-12);
        prop_assert!((est - est.adjoint()).norm() < 1e-12);
        prop_assert!(SymmetricEigen::new(est).eigenvalues.min() >= -1e-12);
    }
}

#[test]
fn plus_state_survives_shot_noise() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let psi = [c(s, 0.0), c(s, 0.0)];
    let rho = projector(psi);
    let trials = 400;
    let good = (0..trials)
        .filter(|&seed| {
            let est = state_tomography(&rho, 10_000, false, seed).unwrap();
            // <psi| est |psi> for the pure target.
            let f = (psi[0].conj() * (est[(0, 0)] * psi[0] + est[(0, 1)] * psi[1])
                + psi[1].conj() * (est[(1, 0)] * psi[0] + est[(1, 1)] * psi[1]))
                .re;
            f >= 0.995
        })
        .count();
    assert!(good as f64 >= 0.99 * trials as f64, "{good}/{trials}");
}

fn chi_error(kraus: &[Mat2], shots: usize, seeds: std::ops::Range<u64>) -> f64 {
    let inputs = input_densities();
    let truth = inputs.map(|rho| apply_kraus(kraus, &rho));
    let exact = chi_from_io(&inputs, &truth).unwrap().raw;
    let n = seeds.end - seeds.start;
    let total: f64 = seeds
        .map(|seed| {
            let mut outputs = [Mat2::zeros(); 4];
            for k in 0..4 {
                outputs[k] = state_tomography(&truth[k], shots, false, 1000 * seed + k as u64).unwrap();
            }
            let diff: Mat4 = chi_from_io(&inputs, &outputs).unwrap().raw - exact;
            diff.norm_squared()
        })
        .sum();
    (total / n as f64).sqrt()
}

#[test]
fn chi_error_scales_as_inverse_sqrt_shots() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let kraus = random_channel(&mut rng, 4);
    let e3 = chi_error(&kraus, 1_000, 0..300);
    let e4 = chi_error(&kraus, 10_000, 0..300);
    let e5 = chi_error(&kraus, 100_000, 0..300);
    let ten = 10f64.sqrt();
    for (ratio, label) in [(e3 / e4, "1e3/1e4"), (e4 / e5, "1e4/1e5")] {
        assert!((ratio / ten - 1.0).abs() < 0.25, "{label}: ratio {ratio} (errors {e3} {e4} {e5})");
    }
}
