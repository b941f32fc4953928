//! Mixture calibration vs the Gaussian parametric bootstrap.
//!
//! Both approximate the same null distribution; on Gaussian data their
//! p-values should be close.
//!
//! Run with: cargo run --release -p covop --example parametric_bootstrap

use covop::hilbert::Grid;
use covop::hypothesis::{parametric_bootstrap_test, run_test, Calibration, TestConfig};
use covop::simulation::{generate_sample, FcpcModel, Population, ScoreLaw};

fn main() -> covop::Result<()> {
    let grid = Grid::uniform(0.0, 1.0, 20)?;
    let model = FcpcModel::with_orthonormal_fourier(
        grid,
        vec![2.0, 1.0],
        vec![0.0, 0.0],
        ScoreLaw::Gaussian,
    )?;
    let s1 = generate_sample(&model, 250, Population::First, 500, 31)?;
    let s2 = generate_sample(&model, 250, Population::First, 500, 32)?;

    let mixture_config = TestConfig {
        calibration: Calibration::MixtureBootstrap,
        n_boot: 5000,
        seed: 1,
        ..TestConfig::default()
    };
    let mixture = run_test(&[s1.clone(), s2.clone()], &mixture_config)?;

    let parametric = parametric_bootstrap_test(&[s1, s2], &mixture_config)?;

    println!("statistic            = {:.4}", mixture.statistic);
    println!("mixture p-value      = {:.4}", mixture.p_value);
    println!("parametric p-value   = {:.4}", parametric.p_value);
    println!("mixture critical     = {:.4}", mixture.critical_value);
    println!("parametric critical  = {:.4}", parametric.critical_value);
    println!("KL components used   = {}", parametric.q_used);
    println!(
        "difference in p      = {:.4}",
        (mixture.p_value - parametric.p_value).abs()
    );
    Ok(())
}
