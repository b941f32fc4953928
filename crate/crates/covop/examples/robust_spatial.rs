//! Robust path: spatial median, spatial covariance and the permutation test.
//!
//! A few wild outlier curves inflate the empirical covariance but barely
//! move the spatial one; the permutation-calibrated spatial test keeps its
//! level. P-values from this path are flagged experimental because no limit
//! law backs them.
//!
//! Run with: cargo run --release -p covop --example robust_spatial

use covop::estimators::{spatial_cov, spatial_median};
use covop::hilbert::{FunctionalSample, Grid};
use covop::hypothesis::{run_test, Calibration, CovEstimator, TestConfig};
use covop::simulation::{generate_sample, FcpcModel, Population, ScoreLaw};

fn contaminate(s: &FunctionalSample, how_many: usize, magnitude: f64) -> FunctionalSample {
    let mut values = s.values().clone();
    let p = s.grid().len();
    for j in 0..how_many.min(s.n_curves()) {
        for m in 0..p {
            values[(j, m)] += magnitude * if m % 2 == 0 { 1.0 } else { -1.0 };
        }
    }
    FunctionalSample::new(s.grid().clone(), values, s.label()).unwrap()
}

fn main() -> covop::Result<()> {
    let grid = Grid::uniform(0.0, 1.0, 20)?;
    let model = FcpcModel::with_orthonormal_fourier(
        grid.clone(),
        vec![2.0, 1.0],
        vec![0.0, 0.0],
        ScoreLaw::Gaussian,
    )?;
    let clean = generate_sample(&model, 80, Population::First, 160, 51)?;
    let dirty = contaminate(&clean, 4, 12.0);

    let median = spatial_median(&dirty, 1e-8, 500)?;
    println!(
        "spatial median: converged = {} after {} iterations",
        median.converged, median.iterations
    );
    let robust = spatial_cov(&dirty, &median.curve)?;
    println!(
        "spatial covariance trace = {:.4} (dropped {} curves)",
        robust.operator.trace(),
        robust.dropped
    );
    let empirical = covop::estimators::sample_cov(&dirty)?;
    println!(
        "empirical trace = {:.4} vs clean-data trace = {:.4}",
        empirical.trace(),
        covop::estimators::sample_cov(&clean)?.trace()
    );

    // Same-law groups, one of them contaminated: the spatial test.
    let other = generate_sample(&model, 80, Population::First, 160, 52)?.relabeled("2");
    let config = TestConfig {
        estimator: CovEstimator::spatial_default(),
        calibration: Calibration::Permutation,
        n_boot: 500,
        seed: 3,
        ..TestConfig::default()
    };
    let report = run_test(&[dirty, other], &config)?;
    println!("spatial permutation test: p = {:.4}", report.p_value);
    println!("experimental flag = {}", report.experimental);
    for w in &report.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
