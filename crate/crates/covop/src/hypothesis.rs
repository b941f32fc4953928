//! Hypothesis tests for equality of covariance operators.
//!
//! The statistic is `T = n * sum_(j>=2) |Gamma_hat_j - Gamma_hat_1|_F^2`
//! with `n` the combined sample size. Under the null it converges to a
//! weighted chi-square mixture whose weights are the eigenvalues of the
//! pooled (or block) fourth-moment operator; the default calibration draws
//! from that estimated mixture. A parametric Gaussian bootstrap and a
//! permutation fallback (the only calibration available for the spatial
//! estimator, which has no established limit law) are also provided.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{
    sample_cov, smoothed_curves, spatial_cov, spatial_median, SmoothingKernel,
};
use crate::fourth_moment::{
    block_psi_w, estimate_upsilon, pooled_basis, TruncationRule, UpsilonMode,
};
use crate::hilbert::{eigen_decompose, FunctionalSample, KernelOperator, DEFAULT_EIGEN_CUTOFF};
use crate::mixture::{pvalue_from_draws, quantile_from_sorted, ChiSquareMixture};
use crate::rng::{domain, stream_rng};

/// Which covariance estimator feeds the statistic.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovEstimator {
    Empirical,
    Smoothed {
        bandwidth: f64,
        kernel: SmoothingKernel,
    },
    Spatial {
        tol: f64,
        max_iter: usize,
    },
}

impl CovEstimator {
    /// Spatial estimator with the default Weiszfeld settings.
    pub fn spatial_default() -> Self {
        CovEstimator::Spatial {
            tol: 1e-8,
            max_iter: 500,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CovEstimator::Empirical => "empirical",
            CovEstimator::Smoothed { .. } => "smoothed",
            CovEstimator::Spatial { .. } => "spatial",
        }
    }
}

/// How the null distribution of the statistic is calibrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Calibration {
    /// Weighted chi-square mixture from the estimated fourth-moment
    /// operator (the default, backed by the asymptotic theory).
    MixtureBootstrap,
    /// Gaussian parametric bootstrap resampling from the pooled covariance.
    ParametricGaussian,
    /// Label permutation; experimental, and the only option for the
    /// spatial estimator.
    Permutation,
}

impl Calibration {
    pub fn name(&self) -> &'static str {
        match self {
            Calibration::MixtureBootstrap => "mixture_bootstrap",
            Calibration::ParametricGaussian => "parametric_gaussian",
            Calibration::Permutation => "permutation",
        }
    }
}

/// Test configuration.
#[derive(Debug, Clone)]
pub struct TestConfig {
    pub alpha: f64,
    pub n_boot: usize,
    pub q_rule: TruncationRule,
    pub upsilon_mode: UpsilonMode,
    pub estimator: CovEstimator,
    pub calibration: Calibration,
    pub seed: u64,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            alpha: 0.05,
            n_boot: 5000,
            q_rule: TruncationRule::default(),
            upsilon_mode: UpsilonMode::Empirical,
            estimator: CovEstimator::Empirical,
            calibration: Calibration::MixtureBootstrap,
            seed: 0,
        }
    }
}

impl TestConfig {
    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.n_boot < 100 {
            return Err(Error::InvalidParameter(format!(
                "n_boot must be at least 100, got {}",
                self.n_boot
            )));
        }
        if let CovEstimator::Spatial { .. } = self.estimator {
            if self.calibration != Calibration::Permutation {
                return Err(Error::InvalidParameter(
                    "the spatial estimator has no established limit law; only \
                     permutation calibration is available for it"
                        .into(),
                ));
            }
        }
        Ok(())
    }
}

/// Full result of a test run; serializes to the stable `covop-test/1`
/// JSON document.
#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub schema: &'static str,
    pub statistic: f64,
    pub p_value: f64,
    pub critical_value: f64,
    pub alpha: f64,
    pub reject: bool,
    pub k: usize,
    pub sample_sizes: Vec<usize>,
    pub taus: Vec<f64>,
    pub labels: Vec<String>,
    pub estimator: CovEstimator,
    pub upsilon_mode: &'static str,
    pub calibration: &'static str,
    pub experimental: bool,
    pub n_boot: usize,
    pub seed: u64,
    /// Basis size (mixture), retained KL components (parametric), 0 otherwise.
    pub q_used: usize,
    pub retained_variance_fraction: Option<f64>,
    pub theta_hat: Vec<f64>,
    pub clipped_psd_mass: f64,
    pub dropped_spatial_terms: Vec<usize>,
    pub warnings: Vec<String>,
}

pub const REPORT_SCHEMA: &str = "covop-test/1";

struct EstimatedCovs {
    covs: Vec<KernelOperator>,
    dropped: Vec<usize>,
    warnings: Vec<String>,
}

fn covariances(samples: &[&FunctionalSample], estimator: &CovEstimator) -> Result<EstimatedCovs> {
    let mut covs = Vec::with_capacity(samples.len());
    let mut dropped = Vec::new();
    let mut warnings = Vec::new();
    for s in samples {
        match estimator {
            CovEstimator::Empirical => covs.push(sample_cov(s)?),
            CovEstimator::Smoothed { bandwidth, kernel } => {
                covs.push(sample_cov(&smoothed_curves(s, *kernel, *bandwidth)?)?)
            }
            CovEstimator::Spatial { tol, max_iter } => {
                let median = spatial_median(s, *tol, *max_iter)?;
                if !median.converged {
                    warnings.push(format!(
                        "population '{}': spatial median stopped after {} iterations \
                         with gradient norm {:.3e}",
                        s.label(),
                        median.iterations,
                        median.gradient_norm
                    ));
                }
                let sc = spatial_cov(s, &median.curve)?;
                dropped.push(sc.dropped);
                covs.push(sc.operator);
            }
        }
    }
    Ok(EstimatedCovs {
        covs,
        dropped,
        warnings,
    })
}

fn validate_samples(samples: &[&FunctionalSample]) -> Result<usize> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 samples, got {}",
            samples.len()
        )));
    }
    let grid = samples[0].grid();
    for s in samples.iter().skip(1) {
        if s.grid() != grid {
            return Err(Error::GridMismatch("test samples"));
        }
    }
    for s in samples {
        if s.n_curves() < 2 {
            return Err(Error::InsufficientSample {
                context: "covariance test",
                needed: 2,
                got: s.n_curves(),
            });
        }
    }
    Ok(samples.iter().map(|s| s.n_curves()).sum())
}

fn statistic_from_covs(covs: &[KernelOperator], n_total: usize) -> Result<f64> {
    let mut acc = 0.0;
    for cov in covs.iter().skip(1) {
        let diff = cov.sub(&covs[0])?;
        acc += diff.hs_inner(&diff)?;
    }
    Ok(n_total as f64 * acc)
}

/// Two-sample statistic `n |Gamma_hat_1 - Gamma_hat_2|_F^2`, `n = n1 + n2`.
pub fn statistic_two(
    s1: &FunctionalSample,
    s2: &FunctionalSample,
    estimator: &CovEstimator,
) -> Result<f64> {
    statistic_refs(&[s1, s2], estimator)
}

/// k-sample statistic `n sum_(j>=2) |Gamma_hat_j - Gamma_hat_1|_F^2`.
pub fn statistic_k(samples: &[FunctionalSample], estimator: &CovEstimator) -> Result<f64> {
    let refs: Vec<&FunctionalSample> = samples.iter().collect();
    statistic_refs(&refs, estimator)
}

fn statistic_refs(samples: &[&FunctionalSample], estimator: &CovEstimator) -> Result<f64> {
    let n_total = validate_samples(samples)?;
    let est = covariances(samples, estimator)?;
    statistic_from_covs(&est.covs, n_total)
}

/// Run the covariance-equality test on `k >= 2` samples.
pub fn run_test(samples: &[FunctionalSample], config: &TestConfig) -> Result<TestReport> {
    config.validate()?;
    let refs: Vec<&FunctionalSample> = samples.iter().collect();
    let n_total = validate_samples(&refs)?;

    if config.calibration == Calibration::ParametricGaussian {
        if samples.len() != 2 {
            return Err(Error::InvalidParameter(format!(
                "the parametric Gaussian bootstrap is defined for 2 samples, got {}",
                samples.len()
            )));
        }
        if matches!(config.estimator, CovEstimator::Spatial { .. }) {
            return Err(Error::InvalidParameter(
                "the parametric Gaussian bootstrap is not available for the \
                 spatial estimator"
                    .into(),
            ));
        }
    }

    // The smoothed path replaces the raw curves once; everything downstream
    // (covariances, scores, fourth moments) sees the smoothed data.
    let effective: Vec<FunctionalSample> = match &config.estimator {
        CovEstimator::Smoothed { bandwidth, kernel } => samples
            .iter()
            .map(|s| smoothed_curves(s, *kernel, *bandwidth))
            .collect::<Result<_>>()?,
        _ => samples.to_vec(),
    };
    let effective_estimator = match &config.estimator {
        CovEstimator::Spatial { .. } => config.estimator.clone(),
        _ => CovEstimator::Empirical,
    };
    let eff_refs: Vec<&FunctionalSample> = effective.iter().collect();

    let est = covariances(&eff_refs, &effective_estimator)?;
    let statistic = statistic_from_covs(&est.covs, n_total)?;

    let sample_sizes: Vec<usize> = samples.iter().map(|s| s.n_curves()).collect();
    let taus: Vec<f64> = sample_sizes
        .iter()
        .map(|&ni| ni as f64 / n_total as f64)
        .collect();
    let labels: Vec<String> = samples.iter().map(|s| s.label().to_string()).collect();

    let mut warnings = est.warnings;
    let calibration = calibrate(
        &effective,
        &est.covs,
        &taus,
        statistic,
        config,
        &mut warnings,
    )?;

    let reject = calibration.p_value <= config.alpha;
    Ok(TestReport {
        schema: REPORT_SCHEMA,
        statistic,
        p_value: calibration.p_value,
        critical_value: calibration.critical_value,
        alpha: config.alpha,
        reject,
        k: samples.len(),
        sample_sizes,
        taus,
        labels,
        estimator: config.estimator.clone(),
        upsilon_mode: config.upsilon_mode.name(),
        calibration: config.calibration.name(),
        experimental: config.calibration == Calibration::Permutation,
        n_boot: config.n_boot,
        seed: config.seed,
        q_used: calibration.q_used,
        retained_variance_fraction: calibration.retained_variance_fraction,
        theta_hat: calibration.theta_hat,
        clipped_psd_mass: calibration.clipped_psd_mass,
        dropped_spatial_terms: est.dropped,
        warnings,
    })
}

/// Two-sample test calibrated by the Gaussian parametric bootstrap.
pub fn parametric_bootstrap_test(
    samples: &[FunctionalSample],
    config: &TestConfig,
) -> Result<TestReport> {
    let config = TestConfig {
        calibration: Calibration::ParametricGaussian,
        ..config.clone()
    };
    run_test(samples, &config)
}

struct CalibrationOutcome {
    p_value: f64,
    critical_value: f64,
    theta_hat: Vec<f64>,
    q_used: usize,
    retained_variance_fraction: Option<f64>,
    clipped_psd_mass: f64,
}

fn calibrate(
    effective: &[FunctionalSample],
    covs: &[KernelOperator],
    taus: &[f64],
    statistic: f64,
    config: &TestConfig,
    warnings: &mut Vec<String>,
) -> Result<CalibrationOutcome> {
    match config.calibration {
        Calibration::MixtureBootstrap => {
            let basis = pooled_basis(effective, config.q_rule)?;
            let mut ups = Vec::with_capacity(effective.len());
            for s in effective {
                ups.push(estimate_upsilon(s, &basis, config.upsilon_mode)?);
            }
            let clipped_psd_mass: f64 = ups.iter().map(|u| u.clipped_mass()).sum();
            let block = block_psi_w(&ups, taus)?;
            let theta_hat = block.eigenvalues(None)?;
            if theta_hat.is_empty() {
                return Err(Error::DegenerateNull(
                    "every estimated mixture weight was clipped to zero; \
                     increase q or collect more data"
                        .into(),
                ));
            }
            let mixture = ChiSquareMixture::new(theta_hat.clone())?;
            let draws = mixture.sample(config.n_boot, config.seed);
            let p_value = pvalue_from_draws(&draws, statistic);
            let mut sorted = draws;
            sorted.sort_by(f64::total_cmp);
            let critical_value = quantile_from_sorted(&sorted, 1.0 - config.alpha);
            Ok(CalibrationOutcome {
                p_value,
                critical_value,
                theta_hat,
                q_used: basis.q(),
                retained_variance_fraction: Some(basis.retained_variance_fraction()),
                clipped_psd_mass,
            })
        }
        Calibration::ParametricGaussian => {
            // Null-imposing resampling: both bootstrap groups are drawn from
            // the pooled covariance via its Karhunen-Loeve expansion.
            let grid = effective[0].grid().clone();
            let mut pooled = KernelOperator::zeros(grid.clone());
            for (cov, &tau) in covs.iter().zip(taus) {
                pooled = pooled.add(&cov.scale(tau))?;
            }
            let eigensystem = eigen_decompose(&pooled, DEFAULT_EIGEN_CUTOFF)?;
            if eigensystem.is_empty() {
                return Err(Error::DegenerateNull(
                    "pooled covariance is zero; nothing to resample".into(),
                ));
            }
            let scales: Vec<f64> = eigensystem.eigenvalues().iter().map(|l| l.sqrt()).collect();
            let n_per_group: Vec<usize> = effective.iter().map(|s| s.n_curves()).collect();
            let n_total: usize = n_per_group.iter().sum();
            let p = grid.len();
            let functions = eigensystem.functions().clone();

            let draws: Vec<f64> = (0..config.n_boot)
                .into_par_iter()
                .map(|r| {
                    let mut rng = stream_rng(config.seed, &[domain::PARAMETRIC, r as u64]);
                    let mut boot_covs = Vec::with_capacity(n_per_group.len());
                    for &ni in &n_per_group {
                        let mut values = DMatrix::zeros(ni, p);
                        for j in 0..ni {
                            for (l, s) in scales.iter().enumerate() {
                                let z: f64 = StandardNormal.sample(&mut rng);
                                let coef = s * z;
                                for m in 0..p {
                                    values[(j, m)] += coef * functions[(m, l)];
                                }
                            }
                        }
                        let sample = FunctionalSample::new(grid.clone(), values, "boot")
                            .expect("bootstrap sample construction");
                        boot_covs.push(sample_cov(&sample).expect("bootstrap covariance"));
                    }
                    statistic_from_covs(&boot_covs, n_total).expect("bootstrap statistic")
                })
                .collect();

            let p_value = pvalue_from_draws(&draws, statistic);
            let mut sorted = draws;
            sorted.sort_by(f64::total_cmp);
            let critical_value = quantile_from_sorted(&sorted, 1.0 - config.alpha);
            Ok(CalibrationOutcome {
                p_value,
                critical_value,
                theta_hat: Vec::new(),
                q_used: eigensystem.len(),
                retained_variance_fraction: None,
                clipped_psd_mass: 0.0,
            })
        }
        Calibration::Permutation => {
            warnings.push(
                "permutation calibration is experimental: no limit law backs \
                 this path"
                    .to_string(),
            );
            let grid = effective[0].grid().clone();
            let p = grid.len();
            let sizes: Vec<usize> = effective.iter().map(|s| s.n_curves()).collect();
            let n_total: usize = sizes.iter().sum();
            let mut pooled_rows = DMatrix::zeros(n_total, p);
            let mut row = 0;
            for s in effective {
                for j in 0..s.n_curves() {
                    for m in 0..p {
                        pooled_rows[(row, m)] = s.values()[(j, m)];
                    }
                    row += 1;
                }
            }
            let estimator = match &config.estimator {
                CovEstimator::Smoothed { .. } => CovEstimator::Empirical,
                other => other.clone(),
            };

            let draws: Vec<f64> = (0..config.n_boot)
                .into_par_iter()
                .map(|r| {
                    let mut rng = stream_rng(config.seed, &[domain::PERMUTATION, r as u64]);
                    let mut order: Vec<usize> = (0..n_total).collect();
                    order.shuffle(&mut rng);
                    let mut groups = Vec::with_capacity(sizes.len());
                    let mut start = 0;
                    for &ni in &sizes {
                        let mut values = DMatrix::zeros(ni, p);
                        for j in 0..ni {
                            let src = order[start + j];
                            for m in 0..p {
                                values[(j, m)] = pooled_rows[(src, m)];
                            }
                        }
                        start += ni;
                        groups.push(
                            FunctionalSample::new(grid.clone(), values, "perm")
                                .expect("permuted sample"),
                        );
                    }
                    let refs: Vec<&FunctionalSample> = groups.iter().collect();
                    let est = covariances(&refs, &estimator).expect("permuted covariance");
                    statistic_from_covs(&est.covs, n_total).expect("permuted statistic")
                })
                .collect();

            let p_value = pvalue_from_draws(&draws, statistic);
            let mut sorted = draws;
            sorted.sort_by(f64::total_cmp);
            let critical_value = quantile_from_sorted(&sorted, 1.0 - config.alpha);
            Ok(CalibrationOutcome {
                p_value,
                critical_value,
                theta_hat: Vec::new(),
                q_used: 0,
                retained_variance_fraction: None,
                clipped_psd_mass: 0.0,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::Grid;
    use rand::Rng;

    fn gaussian_sample(
        grid: &Grid,
        n: usize,
        scale: f64,
        label: &str,
        seed: u64,
    ) -> FunctionalSample {
        let mut rng = crate::rng::stream_rng(seed, &[80]);
        let p = grid.len();
        let values = DMatrix::from_fn(n, p, |_, _| {
            scale * rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        FunctionalSample::new(grid.clone(), values, label).unwrap()
    }

    #[test]
    fn identical_samples_have_zero_statistic_and_unit_pvalue() {
        let g = Grid::uniform(0.0, 1.0, 8).unwrap();
        let s1 = gaussian_sample(&g, 20, 1.0, "a", 1);
        let s2 = s1.relabeled("b");
        let t = statistic_two(&s1, &s2, &CovEstimator::Empirical).unwrap();
        assert_eq!(t, 0.0);
        let report = run_test(&[s1, s2], &TestConfig::default()).unwrap();
        assert_eq!(report.statistic, 0.0);
        assert_eq!(report.p_value, 1.0);
        assert!(!report.reject);
    }

    #[test]
    fn statistic_scales_as_fourth_power() {
        let g = Grid::uniform(0.0, 1.0, 6).unwrap();
        let s1 = gaussian_sample(&g, 12, 1.0, "a", 2);
        let s2 = gaussian_sample(&g, 15, 1.4, "b", 3);
        let t = statistic_two(&s1, &s2, &CovEstimator::Empirical).unwrap();
        let scale = |s: &FunctionalSample, c: f64| {
            FunctionalSample::new(s.grid().clone(), s.values() * c, s.label()).unwrap()
        };
        let t2 =
            statistic_two(&scale(&s1, 2.0), &scale(&s2, 2.0), &CovEstimator::Empirical).unwrap();
        assert_eq!(t2.to_bits(), (16.0 * t).to_bits());
    }

    #[test]
    fn statistic_matches_brute_force_on_small_case() {
        // Two explicit 3-curve samples on a 3-point grid; the oracle is the
        // weighted double sum over the kernel difference.
        let g = Grid::uniform(0.0, 1.0, 3).unwrap();
        let rows1 = [[1.0, 0.0, 2.0], [0.0, 1.0, -1.0], [2.0, 1.0, 0.0]];
        let rows2 = [[0.5, 0.5, 0.5], [-1.0, 2.0, 1.0], [1.5, -0.5, 0.0]];
        let mk = |rows: &[[f64; 3]; 3], label: &str| {
            let values = DMatrix::from_fn(3, 3, |j, m| rows[j][m]);
            FunctionalSample::new(g.clone(), values, label).unwrap()
        };
        let s1 = mk(&rows1, "a");
        let s2 = mk(&rows2, "b");
        let got = statistic_two(&s1, &s2, &CovEstimator::Empirical).unwrap();

        let kernel = |rows: &[[f64; 3]; 3]| -> Vec<Vec<f64>> {
            let mut mean = [0.0; 3];
            for r in rows {
                for m in 0..3 {
                    mean[m] += r[m] / 3.0;
                }
            }
            let mut k = vec![vec![0.0; 3]; 3];
            for r in rows {
                for m in 0..3 {
                    for l in 0..3 {
                        k[m][l] += (r[m] - mean[m]) * (r[l] - mean[l]) / 3.0;
                    }
                }
            }
            k
        };
        let k1 = kernel(&rows1);
        let k2 = kernel(&rows2);
        let w = g.weights();
        let mut hs = 0.0;
        for m in 0..3 {
            for l in 0..3 {
                hs += w[m] * w[l] * (k1[m][l] - k2[m][l]).powi(2);
            }
        }
        let want = 6.0 * hs;
        assert!(
            (got - want).abs() < 1e-12 * want.max(1.0),
            "{got} vs {want}"
        );
    }

    #[test]
    fn k_sample_statistic_reduces_and_extends() {
        let g = Grid::uniform(0.0, 1.0, 5).unwrap();
        let s1 = gaussian_sample(&g, 10, 1.0, "a", 4);
        let s2 = gaussian_sample(&g, 12, 1.2, "b", 5);
        let s3 = gaussian_sample(&g, 9, 0.8, "c", 6);
        let two = statistic_two(&s1, &s2, &CovEstimator::Empirical).unwrap();
        let k2 = statistic_k(&[s1.clone(), s2.clone()], &CovEstimator::Empirical).unwrap();
        assert_eq!(two.to_bits(), k2.to_bits());

        // k = 3 with the second group equal to the first reduces to the
        // remaining pairwise term (up to the combined-n factor).
        let s2_copy = s1.relabeled("copy");
        let k3 = statistic_k(&[s1.clone(), s2_copy, s3.clone()], &CovEstimator::Empirical).unwrap();
        let n3 = (10 + 10 + 9) as f64;
        let d13 = sample_cov(&s3)
            .unwrap()
            .sub(&sample_cov(&s1).unwrap())
            .unwrap();
        let want = n3 * d13.hs_inner(&d13).unwrap();
        assert!((k3 - want).abs() < 1e-12 * want.max(1.0));
    }

    #[test]
    fn label_swap_leaves_everything_invariant() {
        let g = Grid::uniform(0.0, 1.0, 6).unwrap();
        let s1 = gaussian_sample(&g, 14, 1.0, "a", 7);
        let s2 = gaussian_sample(&g, 10, 1.3, "b", 8);
        let config = TestConfig {
            n_boot: 500,
            ..TestConfig::default()
        };
        let ab = run_test(&[s1.clone(), s2.clone()], &config).unwrap();
        let ba = run_test(&[s2, s1], &config).unwrap();
        assert_eq!(ab.statistic.to_bits(), ba.statistic.to_bits());
        assert_eq!(ab.p_value.to_bits(), ba.p_value.to_bits());
        assert_eq!(ab.theta_hat, ba.theta_hat);
        assert_eq!(ab.critical_value.to_bits(), ba.critical_value.to_bits());
    }

    #[test]
    fn permuting_curves_leaves_report_identical() {
        let g = Grid::uniform(0.0, 1.0, 6).unwrap();
        let s1 = gaussian_sample(&g, 13, 1.0, "a", 9);
        let s2 = gaussian_sample(&g, 11, 1.2, "b", 10);
        let permute = |s: &FunctionalSample| {
            let n = s.n_curves();
            let mut order: Vec<usize> = (0..n).collect();
            order.reverse();
            order.swap(0, n / 2);
            let values = DMatrix::from_fn(n, s.grid().len(), |j, m| s.values()[(order[j], m)]);
            FunctionalSample::new(s.grid().clone(), values, s.label()).unwrap()
        };
        let config = TestConfig {
            n_boot: 400,
            ..TestConfig::default()
        };
        let a = run_test(&[s1.clone(), s2.clone()], &config).unwrap();
        let b = run_test(&[permute(&s1), permute(&s2)], &config).unwrap();
        assert_eq!(a.statistic.to_bits(), b.statistic.to_bits());
        assert_eq!(a.theta_hat, b.theta_hat);
        assert_eq!(a.p_value.to_bits(), b.p_value.to_bits());
    }

    #[test]
    fn pvalue_scale_invariance_power_of_two() {
        let g = Grid::uniform(0.0, 1.0, 6).unwrap();
        let s1 = gaussian_sample(&g, 16, 1.0, "a", 11);
        let s2 = gaussian_sample(&g, 12, 1.25, "b", 12);
        let config = TestConfig {
            n_boot: 800,
            ..TestConfig::default()
        };
        let base = run_test(&[s1.clone(), s2.clone()], &config).unwrap();
        for c in [2.0_f64, 0.5, 4.0] {
            let scale = |s: &FunctionalSample| {
                FunctionalSample::new(s.grid().clone(), s.values() * c, s.label()).unwrap()
            };
            let scaled = run_test(&[scale(&s1), scale(&s2)], &config).unwrap();
            assert_eq!(base.p_value.to_bits(), scaled.p_value.to_bits(), "c = {c}");
            assert_eq!(
                scaled.statistic.to_bits(),
                (c.powi(4) * base.statistic).to_bits()
            );
        }
    }

    #[test]
    fn duality_of_pvalue_and_critical_value() {
        let g = Grid::uniform(0.0, 1.0, 6).unwrap();
        for seed in 0..6 {
            let s1 = gaussian_sample(&g, 15, 1.0, "a", 100 + seed);
            let s2 = gaussian_sample(&g, 15, 1.0 + 0.1 * seed as f64, "b", 200 + seed);
            let config = TestConfig {
                n_boot: 500,
                seed,
                ..TestConfig::default()
            };
            let report = run_test(&[s1, s2], &config).unwrap();
            assert_eq!(
                report.p_value <= report.alpha,
                report.statistic >= report.critical_value,
                "p = {}, T = {}, crit = {}",
                report.p_value,
                report.statistic,
                report.critical_value
            );
        }
    }

    #[test]
    fn config_validation() {
        let g = Grid::uniform(0.0, 1.0, 5).unwrap();
        let s1 = gaussian_sample(&g, 8, 1.0, "a", 13);
        let s2 = gaussian_sample(&g, 8, 1.0, "b", 14);
        let bad_alpha = TestConfig {
            alpha: 1.5,
            ..TestConfig::default()
        };
        assert!(run_test(&[s1.clone(), s2.clone()], &bad_alpha).is_err());
        let small_boot = TestConfig {
            n_boot: 10,
            ..TestConfig::default()
        };
        assert!(run_test(&[s1.clone(), s2.clone()], &small_boot).is_err());
        // Spatial + mixture is rejected with an explanation.
        let spatial_mixture = TestConfig {
            estimator: CovEstimator::spatial_default(),
            ..TestConfig::default()
        };
        let err = run_test(&[s1.clone(), s2.clone()], &spatial_mixture).unwrap_err();
        assert!(err.to_string().contains("no established limit law"));
        // Parametric with three samples is rejected.
        let s3 = gaussian_sample(&g, 8, 1.0, "c", 15);
        let parametric = TestConfig {
            calibration: Calibration::ParametricGaussian,
            n_boot: 100,
            ..TestConfig::default()
        };
        assert!(run_test(&[s1, s2, s3], &parametric).is_err());
    }

    #[test]
    fn grid_mismatch_detected() {
        let g1 = Grid::uniform(0.0, 1.0, 5).unwrap();
        let g2 = Grid::uniform(0.0, 2.0, 5).unwrap();
        let s1 = gaussian_sample(&g1, 8, 1.0, "a", 16);
        let s2 = gaussian_sample(&g2, 8, 1.0, "b", 17);
        assert!(matches!(
            statistic_two(&s1, &s2, &CovEstimator::Empirical),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn parametric_bootstrap_on_identical_samples() {
        let g = Grid::uniform(0.0, 1.0, 6).unwrap();
        let s1 = gaussian_sample(&g, 12, 1.0, "a", 18);
        let s2 = s1.relabeled("b");
        let config = TestConfig {
            n_boot: 200,
            ..TestConfig::default()
        };
        let report = parametric_bootstrap_test(&[s1, s2], &config).unwrap();
        assert_eq!(report.statistic, 0.0);
        assert_eq!(report.p_value, 1.0);
        assert_eq!(report.calibration, "parametric_gaussian");
        assert!(report.theta_hat.is_empty());
        assert!(report.q_used > 0);
    }

    #[test]
    fn permutation_path_runs_for_spatial() {
        let g = Grid::uniform(0.0, 1.0, 6).unwrap();
        let s1 = gaussian_sample(&g, 10, 1.0, "a", 19);
        let s2 = gaussian_sample(&g, 10, 1.0, "b", 20);
        let config = TestConfig {
            estimator: CovEstimator::spatial_default(),
            calibration: Calibration::Permutation,
            n_boot: 100,
            ..TestConfig::default()
        };
        let report = run_test(&[s1, s2], &config).unwrap();
        assert!(report.experimental);
        assert!(report.p_value >= 0.0 && report.p_value <= 1.0);
        assert_eq!(report.dropped_spatial_terms, vec![0, 0]);
        assert!(report.warnings.iter().any(|w| w.contains("experimental")));
    }

    #[test]
    fn reports_are_deterministic() {
        let g = Grid::uniform(0.0, 1.0, 6).unwrap();
        let s1 = gaussian_sample(&g, 12, 1.0, "a", 21);
        let s2 = gaussian_sample(&g, 12, 1.1, "b", 22);
        let config = TestConfig {
            n_boot: 300,
            seed: 99,
            ..TestConfig::default()
        };
        let a = run_test(&[s1.clone(), s2.clone()], &config).unwrap();
        let b = run_test(&[s1, s2], &config).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
