//! Statistical behavior of the alternative calibrations: the Gaussian
//! parametric bootstrap holds its level and agrees with the mixture path on
//! Gaussian data; the permutation path holds its level too.

use rayon::prelude::*;

use covop::hypothesis::{parametric_bootstrap_test, run_test, Calibration, TestConfig};
use covop::rng::sub_seed;
use covop::simulation::{generate_sample, FcpcModel, Population, ScoreLaw};

fn model(grid_points: usize) -> FcpcModel {
    let grid = covop::hilbert::Grid::uniform(0.0, 1.0, grid_points).unwrap();
    FcpcModel::with_orthonormal_fourier(grid, vec![2.0, 1.0], vec![0.0, 0.0], ScoreLaw::Gaussian)
        .unwrap()
}

#[test]
fn parametric_bootstrap_holds_its_level() {
    let model = model(12);
    let reps = 500u64;
    let rejections: usize = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let s1 = generate_sample(&model, 200, Population::First, 400, sub_seed(1, &[rep, 1]))
                .unwrap();
            let s2 = generate_sample(&model, 200, Population::First, 400, sub_seed(1, &[rep, 2]))
                .unwrap();
            let config = TestConfig {
                n_boot: 200,
                seed: sub_seed(1, &[rep, 0]),
                ..TestConfig::default()
            };
            let report = parametric_bootstrap_test(&[s1, s2], &config).unwrap();
            report.reject as usize
        })
        .sum();
    let rate = rejections as f64 / reps as f64;
    println!("parametric bootstrap size at alpha = 0.05: {rate:.4} over {reps} reps");
    assert!(
        (0.02..=0.08).contains(&rate),
        "parametric bootstrap size {rate} outside [0.02, 0.08]"
    );
}

#[test]
fn mixture_and_parametric_pvalues_agree_on_gaussian_data() {
    let model = model(20);
    let s1 = generate_sample(&model, 500, Population::First, 1000, 21).unwrap();
    let s2 = generate_sample(&model, 500, Population::First, 1000, 22).unwrap();
    let config = TestConfig {
        n_boot: 5000,
        seed: 3,
        ..TestConfig::default()
    };
    let mixture = run_test(&[s1.clone(), s2.clone()], &config).unwrap();
    let parametric = parametric_bootstrap_test(&[s1, s2], &config).unwrap();
    let gap = (mixture.p_value - parametric.p_value).abs();
    println!(
        "mixture p = {:.4}, parametric p = {:.4}, gap = {:.4}",
        mixture.p_value, parametric.p_value, gap
    );
    assert!(gap <= 0.05, "calibrations disagree: gap {gap}");
}

#[test]
fn smoothed_estimator_holds_its_level() {
    // Pre-smoothing noisy curves keeps the mixture calibration valid: the
    // smoothed estimator shares the limit law of the empirical one.
    use covop::hilbert::FunctionalSample;
    use covop::rng::stream_rng;
    use rand_distr::{Distribution, StandardNormal};

    let model = model(20);
    let noisy = |seed: u64, tag: u64| -> FunctionalSample {
        let clean = generate_sample(&model, 100, Population::First, 200, seed).unwrap();
        let mut rng = stream_rng(seed, &[7777, tag]);
        let mut values = clean.values().clone();
        for x in values.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *x += 0.4 * z;
        }
        FunctionalSample::new(clean.grid().clone(), values, clean.label()).unwrap()
    };
    let reps = 300u64;
    let rejections: usize = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let s1 = noisy(sub_seed(9, &[rep, 1]), 1);
            let s2 = noisy(sub_seed(9, &[rep, 2]), 2);
            let config = TestConfig {
                estimator: covop::hypothesis::CovEstimator::Smoothed {
                    bandwidth: 0.15,
                    kernel: covop::estimators::SmoothingKernel::Epanechnikov,
                },
                n_boot: 500,
                seed: sub_seed(9, &[rep, 0]),
                ..TestConfig::default()
            };
            let report = run_test(&[s1, s2], &config).unwrap();
            report.reject as usize
        })
        .sum();
    let rate = rejections as f64 / reps as f64;
    println!("smoothed-estimator size at alpha = 0.05: {rate:.4} over {reps} reps");
    assert!(
        (0.02..=0.09).contains(&rate),
        "smoothed-estimator size {rate} outside [0.02, 0.09]"
    );
}

#[test]
fn permutation_calibration_holds_its_level() {
    let model = model(12);
    let reps = 300u64;
    let rejections: usize = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let s1 = generate_sample(&model, 60, Population::First, 120, sub_seed(5, &[rep, 1]))
                .unwrap();
            let s2 = generate_sample(&model, 60, Population::First, 120, sub_seed(5, &[rep, 2]))
                .unwrap();
            let config = TestConfig {
                calibration: Calibration::Permutation,
                n_boot: 200,
                seed: sub_seed(5, &[rep, 0]),
                ..TestConfig::default()
            };
            let report = run_test(&[s1, s2], &config).unwrap();
            report.reject as usize
        })
        .sum();
    let rate = rejections as f64 / reps as f64;
    println!("permutation size at alpha = 0.05: {rate:.4} over {reps} reps");
    assert!(
        (0.02..=0.09).contains(&rate),
        "permutation size {rate} outside [0.02, 0.09]"
    );
}
