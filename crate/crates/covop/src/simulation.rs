//! Karhunen-Loeve simulation, contiguous alternatives and Monte Carlo
//! size/power studies.
//!
//! Samples are generated from a finite-rank common-principal-component
//! model `X = mu + sum_l sqrt(lambda_l) f_l phi_l` with standardized
//! independent scores. The second population perturbs the eigenvalues to
//! `lambda_l (1 + Delta_l / sqrt(n))`, the contiguous family under which the
//! statistic has a noncentral weighted chi-square limit; the module also
//! computes that theoretical limit law from the population quantities so
//! Monte Carlo power can be checked against it.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourth_moment::{psi_eigensystem, HsBasis, PsiEigen, TruncationRule, UpsilonMode};
use crate::hilbert::{FunctionalSample, Grid, KernelOperator};
use crate::hypothesis::{run_test, Calibration, CovEstimator, TestConfig};
use crate::mixture::ChiSquareMixture;
use crate::rng::{domain, stream_rng, sub_seed};

/// Standardized score laws (mean 0, variance 1) for the KL expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScoreLaw {
    Gaussian,
    Uniform,
    #[serde(rename = "t")]
    StudentT {
        df: f64,
    },
}

impl ScoreLaw {
    pub fn validate(&self) -> Result<()> {
        if let ScoreLaw::StudentT { df } = self {
            if !df.is_finite() || *df <= 4.0 {
                return Err(Error::InvalidParameter(format!(
                    "t scores need df > 4 for a finite fourth moment, got {df}"
                )));
            }
        }
        Ok(())
    }

    /// Fourth moment `E f^4` of the standardized law.
    pub fn fourth_moment(&self) -> f64 {
        match self {
            ScoreLaw::Gaussian => 3.0,
            ScoreLaw::Uniform => 1.8,
            ScoreLaw::StudentT { df } => 3.0 * (df - 2.0) / (df - 4.0),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            ScoreLaw::Gaussian => StandardNormal.sample(rng),
            ScoreLaw::Uniform => {
                let u: f64 = rng.random::<f64>();
                (2.0 * u - 1.0) * 3.0_f64.sqrt()
            }
            ScoreLaw::StudentT { df } => {
                let t: f64 = rand_distr::StudentT::new(*df)
                    .expect("validated df")
                    .sample(rng);
                t * ((df - 2.0) / df).sqrt()
            }
        }
    }
}

/// Which population of the two-sample contiguous family to draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Population {
    First,
    Second,
}

/// Finite-rank common-principal-component model.
#[derive(Debug, Clone)]
pub struct FcpcModel {
    grid: Grid,
    lambdas: Vec<f64>,
    /// One eigenfunction per column, w-orthonormal.
    functions: DMatrix<f64>,
    deltas: Vec<f64>,
    score_law: ScoreLaw,
    mean_first: Vec<f64>,
    mean_second: Vec<f64>,
}

impl FcpcModel {
    pub fn new(
        grid: Grid,
        lambdas: Vec<f64>,
        functions: DMatrix<f64>,
        deltas: Vec<f64>,
        score_law: ScoreLaw,
        mean_first: Vec<f64>,
        mean_second: Vec<f64>,
    ) -> Result<Self> {
        score_law.validate()?;
        let p = grid.len();
        let rank = lambdas.len();
        if functions.nrows() != p || functions.ncols() != rank {
            return Err(Error::DimensionMismatch {
                context: "model eigenfunctions",
                expected: p * rank,
                got: functions.nrows() * functions.ncols(),
            });
        }
        if deltas.len() != rank {
            return Err(Error::DimensionMismatch {
                context: "model deltas",
                expected: rank,
                got: deltas.len(),
            });
        }
        if mean_first.len() != p || mean_second.len() != p {
            return Err(Error::DimensionMismatch {
                context: "model means",
                expected: p,
                got: mean_first.len().min(mean_second.len()),
            });
        }
        if lambdas.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::InvalidParameter(
                "eigenvalues must be finite and nonnegative".into(),
            ));
        }
        if lambdas.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidParameter(
                "eigenvalues must be nonincreasing".into(),
            ));
        }
        for a in 0..rank {
            for b in 0..rank {
                let fa: Vec<f64> = (0..p).map(|m| functions[(m, a)]).collect();
                let fb: Vec<f64> = (0..p).map(|m| functions[(m, b)]).collect();
                let want = if a == b { 1.0 } else { 0.0 };
                let got = grid.inner_product(&fa, &fb)?;
                if (got - want).abs() > 1e-8 {
                    return Err(Error::InvalidParameter(format!(
                        "eigenfunctions are not orthonormal: <phi_{a}, phi_{b}> = {got}"
                    )));
                }
            }
        }
        Ok(FcpcModel {
            grid,
            lambdas,
            functions,
            deltas,
            score_law,
            mean_first,
            mean_second,
        })
    }

    /// Model with zero means and eigenfunctions built by Gram-Schmidt
    /// orthonormalization of a Fourier family on the grid.
    pub fn with_orthonormal_fourier(
        grid: Grid,
        lambdas: Vec<f64>,
        deltas: Vec<f64>,
        score_law: ScoreLaw,
    ) -> Result<Self> {
        let rank = lambdas.len();
        let p = grid.len();
        if rank == 0 {
            return Err(Error::InvalidParameter(
                "the model needs at least one component".into(),
            ));
        }
        if rank >= p {
            return Err(Error::InvalidParameter(format!(
                "cannot build {rank} orthonormal functions on a {p}-point grid"
            )));
        }
        let (a, b) = (grid.points()[0], grid.points()[p - 1]);
        let mut functions = DMatrix::zeros(p, rank);
        for k in 0..rank {
            let freq = (k / 2 + 1) as f64;
            for (m, t) in grid.points().iter().enumerate() {
                let x = 2.0 * std::f64::consts::PI * freq * (t - a) / (b - a);
                functions[(m, k)] = if k % 2 == 0 { x.sin() } else { x.cos() };
            }
        }
        // Modified Gram-Schmidt in the weighted inner product.
        for k in 0..rank {
            for prev in 0..k {
                let mut coef = 0.0;
                for m in 0..p {
                    coef += grid.weights()[m] * functions[(m, k)] * functions[(m, prev)];
                }
                for m in 0..p {
                    let upd = coef * functions[(m, prev)];
                    functions[(m, k)] -= upd;
                }
            }
            let mut norm2 = 0.0;
            for m in 0..p {
                norm2 += grid.weights()[m] * functions[(m, k)] * functions[(m, k)];
            }
            if norm2 <= 1e-12 {
                return Err(Error::NumericalFailure(
                    "Fourier family degenerated during orthonormalization".into(),
                ));
            }
            let norm = norm2.sqrt();
            for m in 0..p {
                functions[(m, k)] /= norm;
            }
        }
        let zeros = vec![0.0; p];
        Self::new(
            grid,
            lambdas,
            functions,
            deltas,
            score_law,
            zeros.clone(),
            zeros,
        )
    }

    /// Same model with every eigenvalue multiplied by `rho` (a fixed
    /// proportional alternative rather than a contiguous one).
    pub fn scaled_by(&self, rho: f64) -> Result<Self> {
        if !rho.is_finite() || rho <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "proportional factor must be positive, got {rho}"
            )));
        }
        let mut out = self.clone();
        for l in out.lambdas.iter_mut() {
            *l *= rho;
        }
        Ok(out)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn score_law(&self) -> ScoreLaw {
        self.score_law
    }

    pub fn functions(&self) -> &DMatrix<f64> {
        &self.functions
    }

    /// Population covariance kernel `sum_l lambda_l phi_l (x) phi_l`.
    pub fn covariance(&self) -> KernelOperator {
        let p = self.grid.len();
        let mut kernel = DMatrix::zeros(p, p);
        for (l, &lambda) in self.lambdas.iter().enumerate() {
            for m in 0..p {
                for r in m..p {
                    kernel[(m, r)] += lambda * (self.functions[(m, l)] * self.functions[(r, l)]);
                }
            }
        }
        for m in 0..p {
            for r in 0..m {
                kernel[(m, r)] = kernel[(r, m)];
            }
        }
        KernelOperator::new(self.grid.clone(), kernel).expect("model covariance")
    }

    fn effective_lambdas(&self, which: Population, total_n: usize) -> Result<Vec<f64>> {
        match which {
            Population::First => Ok(self.lambdas.clone()),
            Population::Second => {
                let root_n = (total_n as f64).sqrt();
                let mut out = Vec::with_capacity(self.lambdas.len());
                for (l, (&lambda, &delta)) in self.lambdas.iter().zip(&self.deltas).enumerate() {
                    let factor = 1.0 + delta / root_n;
                    if factor < 0.0 {
                        return Err(Error::InvalidParameter(format!(
                            "perturbed eigenvalue {l} is negative: 1 + {delta}/sqrt({total_n}) < 0"
                        )));
                    }
                    out.push(lambda * factor);
                }
                Ok(out)
            }
        }
    }
}

/// Draw `n` curves from the model. `total_n` is the combined two-sample
/// size entering the `1/sqrt(n)` contiguous perturbation of the second
/// population. Deterministic per seed; the stream does not depend on the
/// population, so matched seeds with zero deltas yield identical curves.
pub fn generate_sample(
    model: &FcpcModel,
    n: usize,
    which: Population,
    total_n: usize,
    seed: u64,
) -> Result<FunctionalSample> {
    if n == 0 {
        return Err(Error::InsufficientSample {
            context: "sample generation",
            needed: 1,
            got: 0,
        });
    }
    if total_n == 0 {
        return Err(Error::InvalidParameter("total_n must be positive".into()));
    }
    let lambdas = model.effective_lambdas(which, total_n)?;
    let scales: Vec<f64> = lambdas.iter().map(|l| l.sqrt()).collect();
    let mean = match which {
        Population::First => &model.mean_first,
        Population::Second => &model.mean_second,
    };
    let p = model.grid.len();
    let rank = scales.len();
    let mut values = DMatrix::zeros(n, p);
    for j in 0..n {
        let mut rng = stream_rng(seed, &[domain::GENERATE, j as u64]);
        for m in 0..p {
            values[(j, m)] = mean[m];
        }
        for (l, &s) in scales.iter().enumerate().take(rank) {
            let f = model.score_law.sample(&mut rng);
            let coef = s * f;
            for m in 0..p {
                values[(j, m)] += coef * model.functions[(m, l)];
            }
        }
    }
    let label = match which {
        Population::First => "1",
        Population::Second => "2",
    };
    FunctionalSample::new(model.grid.clone(), values, label)
}

/// Drift operator of the contiguous family expanded in an estimated basis.
#[derive(Debug, Clone)]
pub struct DriftExpansion {
    /// `Gamma = sum_l Delta_l lambda_l phi_l (x) phi_l` as a kernel.
    pub gamma: KernelOperator,
    /// Coefficients `eta_l = <Gamma, upsilon_l>_F` on the Psi eigenvectors.
    pub eta: Vec<f64>,
    /// `|Gamma|_F^2 - sum eta^2`: drift mass the retained eigenvectors miss.
    pub residual_mass: f64,
}

/// Expand the model's drift operator on the eigenvectors of an estimated
/// fourth-moment operator.
pub fn drift_operator(
    model: &FcpcModel,
    psi: &PsiEigen,
    basis: &HsBasis,
) -> Result<DriftExpansion> {
    if model.grid() != basis.eigensystem().grid() {
        return Err(Error::GridMismatch("drift_operator"));
    }
    let q = basis.q();
    if psi.vectors.nrows() != q * q {
        return Err(Error::DimensionMismatch {
            context: "drift_operator psi vectors",
            expected: q * q,
            got: psi.vectors.nrows(),
        });
    }
    let p = model.grid.len();
    let w = model.grid.weights();

    // Gamma kernel.
    let mut kernel = DMatrix::zeros(p, p);
    for (l, (&lambda, &delta)) in model.lambdas.iter().zip(&model.deltas).enumerate() {
        let coef = delta * lambda;
        if coef == 0.0 {
            continue;
        }
        for m in 0..p {
            for r in m..p {
                kernel[(m, r)] += coef * (model.functions[(m, l)] * model.functions[(r, l)]);
            }
        }
    }
    for m in 0..p {
        for r in 0..m {
            kernel[(m, r)] = kernel[(r, m)];
        }
    }
    let gamma = KernelOperator::new(model.grid.clone(), kernel)?;

    // Coordinates of Gamma on the tensor basis: g[(a,b)] = phi_a' W K W phi_b.
    let functions = basis.eigensystem().functions();
    let mut coords = vec![0.0; q * q];
    for a in 0..q {
        for b in 0..q {
            let mut acc = 0.0;
            for m in 0..p {
                let mut inner = 0.0;
                for r in 0..p {
                    inner += w[r] * gamma.kernel()[(m, r)] * functions[(r, b)];
                }
                acc += w[m] * functions[(m, a)] * inner;
            }
            coords[a * q + b] = acc;
        }
    }

    let mut eta = Vec::with_capacity(psi.values.len());
    for l in 0..psi.values.len() {
        let mut acc = 0.0;
        for (idx, c) in coords.iter().enumerate() {
            acc += psi.vectors[(idx, l)] * c;
        }
        eta.push(acc);
    }
    let gamma_mass = gamma.hs_inner(&gamma)?;
    let eta_mass: f64 = eta.iter().map(|e| e * e).sum();
    Ok(DriftExpansion {
        gamma,
        eta,
        residual_mass: (gamma_mass - eta_mass).max(0.0),
    })
}

/// Noncentral mixture with warnings about undetectable drift components.
#[derive(Debug, Clone)]
pub struct NoncentralMixture {
    pub mixture: ChiSquareMixture,
    /// Components with `theta = 0` but `eta != 0`, dropped from the law.
    pub dropped_components: usize,
    /// Total `eta^2` mass of the dropped components.
    pub dropped_drift_mass: f64,
}

/// Build the noncentral limit law `sum theta_l (Z_l + eta_l / sqrt(theta_l))^2`.
pub fn noncentral_mixture(theta: &[f64], eta: &[f64]) -> Result<NoncentralMixture> {
    if theta.len() != eta.len() {
        return Err(Error::DimensionMismatch {
            context: "noncentral_mixture",
            expected: theta.len(),
            got: eta.len(),
        });
    }
    let mut weights = Vec::with_capacity(theta.len());
    let mut shifts = Vec::with_capacity(theta.len());
    let mut dropped_components = 0;
    let mut dropped_drift_mass = 0.0;
    for (&t, &e) in theta.iter().zip(eta) {
        if t > 0.0 {
            weights.push(t);
            shifts.push(e / t.sqrt());
        } else if e != 0.0 {
            dropped_components += 1;
            dropped_drift_mass += e * e;
        }
    }
    if weights.is_empty() {
        return Err(Error::DegenerateNull(
            "no positive mixture weights for the noncentral law".into(),
        ));
    }
    Ok(NoncentralMixture {
        mixture: ChiSquareMixture::noncentral(weights, shifts)?,
        dropped_components,
        dropped_drift_mass,
    })
}

/// Population limit law of the two-sample statistic under the model's
/// contiguous alternative: mixture weights `theta` (eigenvalues of the
/// population pooled fourth-moment operator) and drift coordinates `eta`.
#[derive(Debug, Clone)]
pub struct PopulationNull {
    pub theta: Vec<f64>,
    pub eta: Vec<f64>,
}

/// Exact population pooled operator for the model, expressed in the
/// model's own eigenbasis, using the independence of the standardized
/// scores (the Gaussian case is the Isserlis reduction).
pub fn population_psi(model: &FcpcModel, taus: &[f64; 2]) -> Result<PopulationNull> {
    if taus.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(Error::InvalidParameter(
            "population taus must lie in (0, 1)".into(),
        ));
    }
    let rank = model.lambdas.len();
    let dim = rank * rank;
    let sigma4 = model.score_law.fourth_moment();
    let lam = &model.lambdas;

    // M[(a,b),(c,d)] = E[c_a c_b c_c c_d] - lambda_a d_ab lambda_c d_cd
    // for independent standardized scores.
    let mut m = DMatrix::zeros(dim, dim);
    for a in 0..rank {
        for b in 0..rank {
            for c in 0..rank {
                for d in 0..rank {
                    let mut moment = 0.0;
                    if a == b && b == c && c == d {
                        moment = lam[a] * lam[a] * sigma4;
                    } else if a == b && c == d {
                        moment = lam[a] * lam[c];
                    } else if (a == c && b == d) || (a == d && b == c) {
                        moment = lam[a] * lam[b];
                    }
                    let centering = if a == b && c == d {
                        lam[a] * lam[c]
                    } else {
                        0.0
                    };
                    m[(a * rank + b, c * rank + d)] = moment - centering;
                }
            }
        }
    }
    let factor = 1.0 / taus[0] + 1.0 / taus[1];
    let psi = m * factor;
    let mut eigen = psi_eigensystem(&psi, None)?;
    // The zero eigenvalues of the population operator are exact; drop the
    // numerically tiny positives the solver leaves behind.
    if let Some(&max) = eigen.values.first() {
        let keep = eigen
            .values
            .iter()
            .take_while(|v| **v > 1e-12 * max)
            .count();
        eigen.values.truncate(keep);
        eigen.vectors = eigen.vectors.columns(0, keep).into_owned();
    }

    // Drift coordinates on the retained eigenvectors:
    // g[(a,b)] = Delta_a lambda_a [a == b].
    let mut coords = vec![0.0; dim];
    for a in 0..rank {
        coords[a * rank + a] = model.deltas[a] * lam[a];
    }
    let mut eta = Vec::with_capacity(eigen.values.len());
    for l in 0..eigen.values.len() {
        let mut acc = 0.0;
        for (idx, c) in coords.iter().enumerate() {
            acc += eigen.vectors[(idx, l)] * c;
        }
        eta.push(acc);
    }
    Ok(PopulationNull {
        theta: eigen.values,
        eta,
    })
}

/// Asymptotic power of the level-`alpha` test under the model's contiguous
/// alternative, estimated by Monte Carlo on the population limit laws.
pub fn theoretical_power(
    model: &FcpcModel,
    taus: &[f64; 2],
    alpha: f64,
    n_draws: usize,
    seed: u64,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    let population = population_psi(model, taus)?;
    let central = ChiSquareMixture::new(population.theta.clone())?;
    let crit = central.quantile_mc(1.0 - alpha, n_draws, sub_seed(seed, &[domain::STUDY, 1]))?;
    let noncentral = noncentral_mixture(&population.theta, &population.eta)?;
    let draws = noncentral
        .mixture
        .sample(n_draws, sub_seed(seed, &[domain::STUDY, 2]));
    Ok(draws.iter().filter(|u| **u > crit).count() as f64 / n_draws as f64)
}

fn default_interval() -> (f64, f64) {
    (0.0, 1.0)
}

fn default_alpha() -> f64 {
    0.05
}

fn default_n_boot() -> usize {
    crate::mixture::DEFAULT_N_BOOT
}

fn default_q_var_frac() -> f64 {
    0.99
}

fn default_grid_points() -> usize {
    25
}

/// Upsilon-mode selector in scenario files.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpsilonChoice {
    #[default]
    Empirical,
    Gaussian,
}

impl From<UpsilonChoice> for UpsilonMode {
    fn from(c: UpsilonChoice) -> Self {
        match c {
            UpsilonChoice::Empirical => UpsilonMode::Empirical,
            UpsilonChoice::Gaussian => UpsilonMode::Gaussian,
        }
    }
}

/// A declarative Monte Carlo study: the model, the alternative, the sample
/// sizes and the test configuration.
///
/// Population 1 draws from the base eigenvalues; populations 2..k draw from
/// the perturbed spectrum (`deltas`, contiguous) or the proportionally
/// scaled one (`rho`, fixed alternative). `deltas` and `rho` are mutually
/// exclusive; with neither, every population shares the null spectrum.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_interval")]
    pub interval: (f64, f64),
    pub eigenvalues: Vec<f64>,
    #[serde(default)]
    pub deltas: Option<Vec<f64>>,
    #[serde(default)]
    pub rho: Option<f64>,
    pub score_law: ScoreLaw,
    pub sample_sizes: Vec<usize>,
    pub reps: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_n_boot")]
    pub n_boot: usize,
    #[serde(default)]
    pub q: Option<usize>,
    #[serde(default = "default_q_var_frac")]
    pub q_var_frac: f64,
    #[serde(default)]
    pub upsilon: UpsilonChoice,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points < 2 {
            return Err(Error::Scenario(format!(
                "grid_points: need at least 2, got {}",
                self.grid_points
            )));
        }
        if self.interval.0.is_nan()
            || self.interval.1.is_nan()
            || self.interval.0 >= self.interval.1
        {
            return Err(Error::Scenario(format!(
                "interval: lower bound {} must be below upper bound {}",
                self.interval.0, self.interval.1
            )));
        }
        if self.eigenvalues.is_empty() {
            return Err(Error::Scenario("eigenvalues: must not be empty".into()));
        }
        if self.eigenvalues.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::Scenario(
                "eigenvalues: must be finite and nonnegative".into(),
            ));
        }
        if self.eigenvalues.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Scenario("eigenvalues: must be nonincreasing".into()));
        }
        if let Some(deltas) = &self.deltas {
            if deltas.len() != self.eigenvalues.len() {
                return Err(Error::Scenario(format!(
                    "deltas: length {} does not match eigenvalues length {}",
                    deltas.len(),
                    self.eigenvalues.len()
                )));
            }
            if self.rho.is_some() {
                return Err(Error::Scenario(
                    "deltas and rho are mutually exclusive".into(),
                ));
            }
        }
        if let Some(rho) = self.rho {
            if !rho.is_finite() || rho <= 0.0 {
                return Err(Error::Scenario(format!("rho: must be positive, got {rho}")));
            }
        }
        self.score_law
            .validate()
            .map_err(|e| Error::Scenario(format!("score_law: {e}")))?;
        if self.sample_sizes.len() < 2 {
            return Err(Error::Scenario(format!(
                "sample_sizes: need at least 2 groups, got {}",
                self.sample_sizes.len()
            )));
        }
        if self.sample_sizes.iter().any(|n| *n < 2) {
            return Err(Error::Scenario(
                "sample_sizes: every group needs at least 2 curves".into(),
            ));
        }
        if self.reps == 0 {
            return Err(Error::Scenario("reps: must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Scenario(format!(
                "alpha: must be in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.n_boot < 100 {
            return Err(Error::Scenario(format!(
                "n_boot: must be at least 100, got {}",
                self.n_boot
            )));
        }
        if let Some(q) = self.q {
            if q == 0 {
                return Err(Error::Scenario("q: must be at least 1".into()));
            }
        }
        if !(self.q_var_frac > 0.0 && self.q_var_frac <= 1.0) {
            return Err(Error::Scenario(format!(
                "q_var_frac: must be in (0, 1], got {}",
                self.q_var_frac
            )));
        }
        Ok(())
    }

    /// Build the null model on the scenario grid.
    pub fn model(&self) -> Result<FcpcModel> {
        self.validate()?;
        let grid = Grid::uniform(self.interval.0, self.interval.1, self.grid_points)?;
        let deltas = self
            .deltas
            .clone()
            .unwrap_or_else(|| vec![0.0; self.eigenvalues.len()]);
        FcpcModel::with_orthonormal_fourier(grid, self.eigenvalues.clone(), deltas, self.score_law)
    }

    pub fn test_config(&self, seed: u64) -> TestConfig {
        TestConfig {
            alpha: self.alpha,
            n_boot: self.n_boot,
            q_rule: match self.q {
                Some(q) => TruncationRule::FixedQ(q),
                None => TruncationRule::VarianceFraction(self.q_var_frac),
            },
            upsilon_mode: self.upsilon.into(),
            estimator: CovEstimator::Empirical,
            calibration: Calibration::MixtureBootstrap,
            seed,
        }
    }
}

/// One replication of a study.
#[derive(Debug, Clone, Serialize)]
pub struct RepOutcome {
    pub rep: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
}

/// Aggregate result of a Monte Carlo study.
#[derive(Debug, Clone, Serialize)]
pub struct StudyResult {
    pub alpha: f64,
    pub reps: usize,
    pub rejection_rate: f64,
    pub mc_stderr: f64,
    /// Asymptotic power from the population limit law, for delta-based
    /// (contiguous) scenarios.
    pub theoretical_power: Option<f64>,
    pub outcomes: Vec<RepOutcome>,
}

/// Run the study: generate fresh samples and apply the test, `reps` times.
///
/// Deterministic for a fixed seed and independent of thread scheduling.
pub fn mc_size_power(spec: &ScenarioSpec, seed: u64) -> Result<StudyResult> {
    spec.validate()?;
    let model = spec.model()?;
    let total_n: usize = spec.sample_sizes.iter().sum();
    let alt_model = match spec.rho {
        Some(rho) => Some(model.scaled_by(rho)?),
        None => None,
    };
    let contiguous = spec.deltas.is_some();

    let outcomes: Vec<RepOutcome> = (0..spec.reps)
        .into_par_iter()
        .map(|rep| {
            let mut samples = Vec::with_capacity(spec.sample_sizes.len());
            for (i, &ni) in spec.sample_sizes.iter().enumerate() {
                let pop_seed = sub_seed(seed, &[domain::STUDY, rep as u64, (i + 1) as u64]);
                let sample = if i == 0 {
                    generate_sample(&model, ni, Population::First, total_n, pop_seed)
                } else if let Some(alt) = &alt_model {
                    generate_sample(alt, ni, Population::First, total_n, pop_seed)
                } else if contiguous {
                    generate_sample(&model, ni, Population::Second, total_n, pop_seed)
                } else {
                    generate_sample(&model, ni, Population::First, total_n, pop_seed)
                }
                .expect("sample generation");
                samples.push(sample.relabeled(format!("{}", i + 1)));
            }
            let config = spec.test_config(sub_seed(seed, &[domain::STUDY, rep as u64, 0]));
            let report = run_test(&samples, &config).expect("study test run");
            RepOutcome {
                rep,
                statistic: report.statistic,
                p_value: report.p_value,
                reject: report.reject,
            }
        })
        .collect();

    let rejections = outcomes.iter().filter(|o| o.reject).count();
    let rate = rejections as f64 / spec.reps as f64;
    let stderr = (rate * (1.0 - rate) / spec.reps as f64).sqrt();
    let theoretical_power = if contiguous && spec.sample_sizes.len() == 2 {
        let taus = [
            spec.sample_sizes[0] as f64 / total_n as f64,
            spec.sample_sizes[1] as f64 / total_n as f64,
        ];
        Some(theoretical_power(
            &model,
            &taus,
            spec.alpha,
            1_000_000,
            sub_seed(seed, &[domain::STUDY, u64::MAX]),
        )?)
    } else {
        None
    };
    Ok(StudyResult {
        alpha: spec.alpha,
        reps: spec.reps,
        rejection_rate: rate,
        mc_stderr: stderr,
        theoretical_power,
        outcomes,
    })
}
