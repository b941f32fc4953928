//! Inspecting the estimated null distribution.
//!
//! Builds the pooled tensor basis, the per-sample fourth-moment operators
//! and the weighted chi-square mixture, then compares Monte Carlo quantiles
//! with the analytic CDF.
//!
//! Run with: cargo run --release -p covop --example null_mixture

use covop::fourth_moment::{
    block_psi_w, estimate_upsilon, pooled_basis, TruncationRule, UpsilonMode,
};
use covop::hilbert::Grid;
use covop::mixture::ChiSquareMixture;
use covop::simulation::{generate_sample, population_psi, FcpcModel, Population, ScoreLaw};

fn main() -> covop::Result<()> {
    let grid = Grid::uniform(0.0, 1.0, 25)?;
    let model = FcpcModel::with_orthonormal_fourier(
        grid,
        vec![2.0, 1.0],
        vec![0.0, 0.0],
        ScoreLaw::Gaussian,
    )?;
    let s1 = generate_sample(&model, 400, Population::First, 800, 81)?;
    let s2 = generate_sample(&model, 400, Population::First, 800, 82)?;
    let samples = [s1, s2];

    let basis = pooled_basis(&samples, TruncationRule::VarianceFraction(0.99))?;
    println!(
        "tensor basis: q = {} ({}% of pooled trace retained)",
        basis.q(),
        (100.0 * basis.retained_variance_fraction()).round()
    );
    let ups1 = estimate_upsilon(&samples[0], &basis, UpsilonMode::Empirical)?;
    let ups2 = estimate_upsilon(&samples[1], &basis, UpsilonMode::Empirical)?;
    let block = block_psi_w(&[ups1, ups2], &[0.5, 0.5])?;
    let theta = block.eigenvalues(None)?;
    println!("estimated mixture weights: {:?}", rounded(&theta));

    let population = population_psi(&model, &[0.5, 0.5])?;
    println!(
        "population weights:        {:?}",
        rounded(&population.theta)
    );

    let mixture = ChiSquareMixture::new(theta)?;
    println!(
        "mixture mean = {:.3}, variance = {:.3}",
        mixture.mean(),
        mixture.variance()
    );
    for level in [0.90, 0.95, 0.99] {
        let q = mixture.quantile_mc(level, 200_000, 5)?;
        println!(
            "quantile at {level:.2}: {q:>9.3}   analytic CDF there: {:.4}",
            mixture.cdf(q)?
        );
    }
    Ok(())
}

fn rounded(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|x| (x * 100.0).round() / 100.0).collect()
}
