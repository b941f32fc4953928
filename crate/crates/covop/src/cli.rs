//! Command-line interface: `test`, `simulate` and `power`.
//!
//! All commands are deterministic functions of their inputs and the seed.
//! Reports go to stdout as JSON; per-replicate tables go to CSV files.
//! Exit codes: 0 success, 2 input error, 3 numerical failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::csvio::{ingest_csv_path, Layout};
use crate::error::{Error, Result};
use crate::estimators::SmoothingKernel;
use crate::fourth_moment::{TruncationRule, UpsilonMode};
use crate::hypothesis::{run_test, Calibration, CovEstimator, TestConfig, TestReport};
use crate::mixture::ChiSquareMixture;
use crate::simulation::{mc_size_power, ScenarioSpec, StudyResult};

#[derive(Parser, Debug)]
#[command(
    name = "covop",
    version,
    about = "Tests for equality of covariance operators of functional data"
)]
pub struct Cli {
    /// Size of the thread pool (default: all cores). Results do not depend
    /// on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Test equality of covariance operators across the groups of a CSV file.
    Test(TestArgs),
    /// Run a Monte Carlo size/power study from a scenario file.
    Simulate(SimulateArgs),
    /// Sweep drift magnitudes and compare Monte Carlo power with theory.
    Power(PowerArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum LayoutArg {
    Wide,
    Long,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum UpsilonArg {
    Empirical,
    Gaussian,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum EstimatorArg {
    Empirical,
    Smoothed,
    Spatial,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum CalibrationArg {
    Mixture,
    Parametric,
    Permutation,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum KernelArg {
    Epanechnikov,
    Gaussian,
    Uniform,
}

#[derive(Args, Debug)]
pub struct TestArgs {
    /// CSV file with the functional samples.
    #[arg(long)]
    pub data: PathBuf,

    /// CSV layout.
    #[arg(long, value_enum, default_value = "wide")]
    pub layout: LayoutArg,

    /// Test level.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// Monte Carlo draws for the calibration.
    #[arg(long = "n-boot", default_value_t = 5000)]
    pub n_boot: usize,

    /// Fixed tensor-basis size (overrides --q-var-frac).
    #[arg(long)]
    pub q: Option<usize>,

    /// Pooled-variance fraction selecting the basis size.
    #[arg(long = "q-var-frac", default_value_t = 0.99)]
    pub q_var_frac: f64,

    /// Fourth-moment estimator.
    #[arg(long, value_enum, default_value = "empirical")]
    pub upsilon: UpsilonArg,

    /// Covariance estimator.
    #[arg(long, value_enum, default_value = "empirical")]
    pub estimator: EstimatorArg,

    /// Bandwidth for the smoothed estimator.
    #[arg(long)]
    pub bandwidth: Option<f64>,

    /// Smoothing kernel for the smoothed estimator.
    #[arg(long, value_enum, default_value = "epanechnikov")]
    pub kernel: KernelArg,

    /// Null-distribution calibration.
    #[arg(long, value_enum, default_value = "mixture")]
    pub calibration: CalibrationArg,

    /// RNG seed; all randomness derives from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Write a plot-friendly CSV of the estimated mixture weights and the
    /// empirical null CDF to this path.
    #[arg(long = "null-table")]
    pub null_table: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: PathBuf,

    /// Where to write the per-replicate CSV (default: scenario stem +
    /// ".reps.csv" next to the scenario).
    #[arg(long)]
    pub csv: Option<PathBuf>,

    /// Override the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct PowerArgs {
    /// Scenario JSON file (its deltas, if any, are replaced by the sweep).
    #[arg(long)]
    pub scenario: PathBuf,

    /// Comma-separated drift magnitudes applied to every component.
    #[arg(long, value_delimiter = ',', required = true)]
    pub deltas: Vec<f64>,

    /// Where to write the per-replicate CSV (default: scenario stem +
    /// ".power.csv" next to the scenario).
    #[arg(long)]
    pub csv: Option<PathBuf>,

    /// Override the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Parse `std::env::args` and run; returns the process exit code.
pub fn run() -> i32 {
    execute_from(std::env::args_os(), &mut std::io::stdout())
}

/// Run with explicit arguments, writing reports to `out`.
pub fn execute_from<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Some(threads) = cli.threads {
        // Ignore the error when a global pool already exists (tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let outcome = match cli.command {
        Command::Test(args) => cmd_test(&args, out),
        Command::Simulate(args) => cmd_simulate(&args, out),
        Command::Power(args) => cmd_power(&args, out),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn build_config(args: &TestArgs) -> Result<TestConfig> {
    let estimator = match args.estimator {
        EstimatorArg::Empirical => CovEstimator::Empirical,
        EstimatorArg::Smoothed => {
            let bandwidth = args.bandwidth.ok_or_else(|| {
                Error::InvalidParameter("--estimator smoothed requires --bandwidth".into())
            })?;
            let kernel = match args.kernel {
                KernelArg::Epanechnikov => SmoothingKernel::Epanechnikov,
                KernelArg::Gaussian => SmoothingKernel::Gaussian,
                KernelArg::Uniform => SmoothingKernel::Uniform,
            };
            CovEstimator::Smoothed { bandwidth, kernel }
        }
        EstimatorArg::Spatial => CovEstimator::spatial_default(),
    };
    Ok(TestConfig {
        alpha: args.alpha,
        n_boot: args.n_boot,
        q_rule: match args.q {
            Some(q) => TruncationRule::FixedQ(q),
            None => TruncationRule::VarianceFraction(args.q_var_frac),
        },
        upsilon_mode: match args.upsilon {
            UpsilonArg::Empirical => UpsilonMode::Empirical,
            UpsilonArg::Gaussian => UpsilonMode::Gaussian,
        },
        estimator,
        calibration: match args.calibration {
            CalibrationArg::Mixture => Calibration::MixtureBootstrap,
            CalibrationArg::Parametric => Calibration::ParametricGaussian,
            CalibrationArg::Permutation => Calibration::Permutation,
        },
        seed: args.seed,
    })
}

fn cmd_test(args: &TestArgs, out: &mut dyn Write) -> Result<()> {
    let layout = match args.layout {
        LayoutArg::Wide => Layout::Wide,
        LayoutArg::Long => Layout::Long,
    };
    let samples = ingest_csv_path(&args.data, layout)?;
    if samples.len() < 2 {
        return Err(Error::Ingest(format!(
            "need at least 2 groups in the data, found {}",
            samples.len()
        )));
    }
    let config = build_config(args)?;
    let report = run_test(&samples, &config)?;
    if let Some(path) = &args.null_table {
        write_null_table(path, &report, &config)?;
    }
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::NumericalFailure(format!("report serialization: {e}")))?;
    writeln!(out, "{json}")?;
    Ok(())
}

/// Plot-friendly table: one `theta,<l>,<value>` row per mixture weight,
/// then `cdf,<u>,<level>` rows tracing the empirical null CDF (the same
/// draw set the p-value was counted against).
fn write_null_table(path: &Path, report: &TestReport, config: &TestConfig) -> Result<()> {
    if report.theta_hat.is_empty() {
        return Err(Error::InvalidParameter(
            "--null-table requires the mixture calibration".into(),
        ));
    }
    let mixture = ChiSquareMixture::new(report.theta_hat.clone())?;
    let mut draws = mixture.sample(config.n_boot, config.seed);
    draws.sort_by(f64::total_cmp);
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "kind,x,y")?;
    for (l, theta) in report.theta_hat.iter().enumerate() {
        writeln!(file, "theta,{},{theta}", l + 1)?;
    }
    let n = draws.len();
    for (i, u) in draws.iter().enumerate() {
        writeln!(file, "cdf,{u},{}", (i + 1) as f64 / n as f64)?;
    }
    Ok(())
}

fn load_scenario(path: &Path) -> Result<ScenarioSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Scenario(format!("cannot read {}: {e}", path.display())))?;
    let spec: ScenarioSpec = serde_json::from_str(&text)
        .map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
    spec.validate()?;
    Ok(spec)
}

fn default_csv_path(scenario: &Path, suffix: &str) -> PathBuf {
    let stem = scenario
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_string());
    scenario.with_file_name(format!("{stem}{suffix}"))
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    schema: &'static str,
    scenario: &'a ScenarioSpec,
    seed: u64,
    alpha: f64,
    reps: usize,
    rejection_rate: f64,
    mc_stderr: f64,
    theoretical_power: Option<f64>,
    csv: String,
}

fn write_rep_csv(path: &Path, rows: &[(Option<f64>, &StudyResult)]) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    let with_delta = rows.iter().any(|(d, _)| d.is_some());
    if with_delta {
        writeln!(file, "delta,rep,statistic,p_value,reject")?;
    } else {
        writeln!(file, "rep,statistic,p_value,reject")?;
    }
    for (delta, result) in rows {
        for o in &result.outcomes {
            if let Some(d) = delta {
                writeln!(
                    file,
                    "{d},{},{},{},{}",
                    o.rep, o.statistic, o.p_value, o.reject as u8
                )?;
            } else {
                writeln!(
                    file,
                    "{},{},{},{}",
                    o.rep, o.statistic, o.p_value, o.reject as u8
                )?;
            }
        }
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let spec = load_scenario(&args.scenario)?;
    let seed = args.seed.unwrap_or(spec.seed);
    let result = mc_size_power(&spec, seed)?;
    let csv_path = args
        .csv
        .clone()
        .unwrap_or_else(|| default_csv_path(&args.scenario, ".reps.csv"));
    write_rep_csv(&csv_path, &[(None, &result)])?;
    let summary = SimulateSummary {
        schema: "covop-sim/1",
        scenario: &spec,
        seed,
        alpha: result.alpha,
        reps: result.reps,
        rejection_rate: result.rejection_rate,
        mc_stderr: result.mc_stderr,
        theoretical_power: result.theoretical_power,
        csv: csv_path.display().to_string(),
    };
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::NumericalFailure(format!("summary serialization: {e}")))?;
    writeln!(out, "{json}")?;
    Ok(())
}

#[derive(Serialize)]
struct PowerPoint {
    delta: f64,
    rejection_rate: f64,
    mc_stderr: f64,
    theoretical_power: Option<f64>,
}

#[derive(Serialize)]
struct PowerSummary<'a> {
    schema: &'static str,
    scenario: &'a ScenarioSpec,
    seed: u64,
    alpha: f64,
    reps: usize,
    points: Vec<PowerPoint>,
    csv: String,
}

fn cmd_power(args: &PowerArgs, out: &mut dyn Write) -> Result<()> {
    let base = load_scenario(&args.scenario)?;
    if base.rho.is_some() {
        return Err(Error::Scenario(
            "power sweeps use deltas; remove rho from the scenario".into(),
        ));
    }
    let seed = args.seed.unwrap_or(base.seed);
    let mut points = Vec::with_capacity(args.deltas.len());
    let mut results = Vec::with_capacity(args.deltas.len());
    for &delta in &args.deltas {
        let spec = ScenarioSpec {
            deltas: Some(vec![delta; base.eigenvalues.len()]),
            ..base.clone()
        };
        spec.validate()?;
        let result = mc_size_power(&spec, seed)?;
        points.push(PowerPoint {
            delta,
            rejection_rate: result.rejection_rate,
            mc_stderr: result.mc_stderr,
            theoretical_power: result.theoretical_power,
        });
        results.push((delta, result));
    }
    let csv_path = args
        .csv
        .clone()
        .unwrap_or_else(|| default_csv_path(&args.scenario, ".power.csv"));
    let rows: Vec<(Option<f64>, &StudyResult)> =
        results.iter().map(|(d, r)| (Some(*d), r)).collect();
    write_rep_csv(&csv_path, &rows)?;
    let summary = PowerSummary {
        schema: "covop-power/1",
        scenario: &base,
        seed,
        alpha: base.alpha,
        reps: base.reps,
        points,
        csv: csv_path.display().to_string(),
    };
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::NumericalFailure(format!("summary serialization: {e}")))?;
    writeln!(out, "{json}")?;
    Ok(())
}
