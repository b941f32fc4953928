//! Monte Carlo size check: rejection rate under the null at level 5%.
//!
//! Run with: cargo run --release -p covop --example size_study

use covop::simulation::{mc_size_power, ScenarioSpec, ScoreLaw, UpsilonChoice};

fn main() -> covop::Result<()> {
    let spec = ScenarioSpec {
        grid_points: 25,
        interval: (0.0, 1.0),
        eigenvalues: vec![2.0, 1.0, 0.5],
        deltas: None,
        rho: None,
        score_law: ScoreLaw::Gaussian,
        sample_sizes: vec![150, 150],
        reps: 300,
        alpha: 0.05,
        n_boot: 2000,
        q: None,
        q_var_frac: 0.99,
        upsilon: UpsilonChoice::Empirical,
        seed: 42,
    };
    let result = mc_size_power(&spec, spec.seed)?;
    println!(
        "rejection rate at alpha = {}: {:.4} (MC stderr {:.4}, {} reps)",
        result.alpha, result.rejection_rate, result.mc_stderr, result.reps
    );
    println!("first replications:");
    for o in result.outcomes.iter().take(8) {
        println!(
            "  rep {:>3}: T = {:8.3}  p = {:.4}  reject = {}",
            o.rep, o.statistic, o.p_value, o.reject
        );
    }
    Ok(())
}
