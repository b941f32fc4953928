//! Fourth-moment operators on a truncated tensor basis.
//!
//! The limiting covariance of `sqrt(n) (Gamma_hat - Gamma)` is an operator
//! acting on Hilbert-Schmidt operators. On a basis of `q` pooled
//! eigenfunctions it becomes a `q^2 x q^2` symmetric matrix indexed by pairs
//! `(a, b)`: entry `M[(a,b),(c,d)]` is the covariance of the projected outer
//! products. The pooled two-sample operator is `tau_1^-1 M_1 + tau_2^-1 M_2`;
//! the k-sample version is a `(k-1) x (k-1)` block matrix of the same pieces.
//! The eigenvalues of these matrices weight the chi-square mixture of the
//! null distribution.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimators::{sample_cov, sample_mean};
use crate::hilbert::{
    eigen_decompose, EigenSystem, FunctionalSample, KernelOperator, DEFAULT_EIGEN_CUTOFF,
};
use crate::linalg::{canonical_row_order, symmetric_eigen};

/// How many pooled eigenfunctions to keep for the tensor basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruncationRule {
    /// Exactly `q` basis functions (clamped to the pooled rank).
    FixedQ(usize),
    /// Smallest `q` capturing this fraction of the pooled trace, capped at
    /// `floor(n^(1/3))` and at the pooled rank.
    VarianceFraction(f64),
}

impl Default for TruncationRule {
    fn default() -> Self {
        TruncationRule::VarianceFraction(0.99)
    }
}

impl TruncationRule {
    fn validate(&self) -> Result<()> {
        match self {
            TruncationRule::FixedQ(q) => {
                if *q == 0 {
                    return Err(Error::InvalidParameter("fixed q must be >= 1".into()));
                }
            }
            TruncationRule::VarianceFraction(f) => {
                if !(*f > 0.0 && *f <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "variance fraction must be in (0, 1], got {f}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Tensor basis `{phi_a (x) phi_b}` built from pooled covariance
/// eigenfunctions, truncated to `q` functions.
#[derive(Debug, Clone, PartialEq)]
pub struct HsBasis {
    eigensystem: EigenSystem,
    q: usize,
    retained_variance_fraction: f64,
    n_total: usize,
}

impl HsBasis {
    /// Number of retained eigenfunctions.
    pub fn q(&self) -> usize {
        self.q
    }

    /// Dimension of the tensor basis, `q^2`.
    pub fn tensor_dim(&self) -> usize {
        self.q * self.q
    }

    /// Pooled eigensystem the basis was cut from.
    pub fn eigensystem(&self) -> &EigenSystem {
        &self.eigensystem
    }

    /// Fraction of the pooled trace captured by the retained functions.
    pub fn retained_variance_fraction(&self) -> f64 {
        self.retained_variance_fraction
    }

    /// Combined sample size the basis was built from.
    pub fn n_total(&self) -> usize {
        self.n_total
    }

    /// Flat index of the tensor element `phi_a (x) phi_b`.
    pub fn tensor_index(&self, a: usize, b: usize) -> usize {
        a * self.q + b
    }

    /// Inverse of [`tensor_index`](Self::tensor_index).
    pub fn tensor_pair(&self, idx: usize) -> (usize, usize) {
        (idx / self.q, idx % self.q)
    }

    /// The `a`-th basis function as a curve.
    pub fn function(&self, a: usize) -> Vec<f64> {
        self.eigensystem.function(a)
    }
}

/// Eigendecomposition of the pooled covariance `sum_i tau_i Gamma_hat_i`,
/// truncated by `rule`.
pub fn pooled_basis(samples: &[FunctionalSample], rule: TruncationRule) -> Result<HsBasis> {
    rule.validate()?;
    if samples.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "pooled basis needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let grid = samples[0].grid().clone();
    for s in samples.iter().skip(1) {
        if s.grid() != &grid {
            return Err(Error::GridMismatch("pooled basis"));
        }
    }
    let n_total: usize = samples.iter().map(|s| s.n_curves()).sum();

    let mut pooled = KernelOperator::zeros(grid);
    for s in samples {
        let tau = s.n_curves() as f64 / n_total as f64;
        pooled = pooled.add(&sample_cov(s)?.scale(tau))?;
    }
    let eigensystem = eigen_decompose(&pooled, DEFAULT_EIGEN_CUTOFF)?;
    if eigensystem.is_empty() {
        return Err(Error::DegenerateNull(
            "pooled covariance is zero; no basis can be built".into(),
        ));
    }

    let rank = eigensystem.len();
    let total_trace: f64 = eigensystem.eigenvalues().iter().sum();
    let q = match rule {
        TruncationRule::FixedQ(q) => q.min(rank),
        TruncationRule::VarianceFraction(frac) => {
            let cap = (n_total as f64).powf(1.0 / 3.0).floor() as usize;
            let cap = cap.clamp(1, rank);
            let mut cum = 0.0;
            let mut q = rank;
            for (l, lambda) in eigensystem.eigenvalues().iter().enumerate() {
                cum += lambda;
                if cum / total_trace >= frac {
                    q = l + 1;
                    break;
                }
            }
            q.min(cap)
        }
    };
    let retained: f64 = eigensystem.eigenvalues().iter().take(q).sum();

    // Keep only the first q eigenpairs.
    let p = samples[0].grid().len();
    let mut functions = DMatrix::zeros(p, q);
    for a in 0..q {
        for m in 0..p {
            functions[(m, a)] = eigensystem.functions()[(m, a)];
        }
    }
    let truncated = EigenSystem::from_parts(
        samples[0].grid().clone(),
        eigensystem.eigenvalues()[..q].to_vec(),
        functions,
        eigensystem.clipped_negative_mass(),
        eigensystem.dropped_mass() + eigensystem.eigenvalues()[q..].iter().sum::<f64>(),
    );
    Ok(HsBasis {
        eigensystem: truncated,
        q,
        retained_variance_fraction: retained / total_trace,
        n_total,
    })
}

/// Scores of the centered curves on the basis functions:
/// `c[j, a] = <X_j - mean, phi_a>`. Rows follow the input curve order.
pub fn project_scores(s: &FunctionalSample, basis: &HsBasis) -> Result<DMatrix<f64>> {
    if s.grid() != basis.eigensystem.grid() {
        return Err(Error::GridMismatch("project_scores"));
    }
    let p = s.grid().len();
    let q = basis.q;
    let n = s.n_curves();
    let w = s.grid().weights();
    let mean = sample_mean(s);
    let values = s.values();

    // Weighted basis functions: wphi[m, a] = w_m phi_a(t_m).
    let functions = basis.eigensystem.functions();
    let mut scores = DMatrix::zeros(n, q);
    for j in 0..n {
        for a in 0..q {
            let mut acc = 0.0;
            for m in 0..p {
                acc += w[m] * (values[(j, m)] - mean[m]) * functions[(m, a)];
            }
            scores[(j, a)] = acc;
        }
    }
    Ok(scores)
}

/// Which plug-in is used for the fourth-moment entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpsilonMode {
    /// Empirical fourth moments of the scores.
    Empirical,
    /// Gaussian (Isserlis) reduction from the score covariance.
    Gaussian,
}

impl UpsilonMode {
    pub fn name(&self) -> &'static str {
        match self {
            UpsilonMode::Empirical => "empirical",
            UpsilonMode::Gaussian => "gaussian",
        }
    }
}

/// A fourth-moment operator expressed on a tensor basis: the symmetric PSD
/// `q^2 x q^2` matrix of projected covariances of outer products.
#[derive(Debug, Clone)]
pub struct FourthMomentOperator {
    basis: HsBasis,
    matrix: DMatrix<f64>,
    n: usize,
    clipped_mass: f64,
}

impl FourthMomentOperator {
    pub fn basis(&self) -> &HsBasis {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Sample size the operator was estimated from.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total mass of negative eigenvalues clipped during the PSD repair.
    pub fn clipped_mass(&self) -> f64 {
        self.clipped_mass
    }

    /// Positive eigenvalues, nonincreasing (see [`psi_eigenvalues`]).
    pub fn eigenvalues(&self, max_terms: Option<usize>) -> Result<Vec<f64>> {
        psi_eigenvalues(&self.matrix, max_terms)
    }
}

/// Estimate the fourth-moment operator of one sample on a common basis.
///
/// Empirical mode: `M[(a,b),(c,d)] = (1/n) sum_j c_ja c_jb c_jc c_jd -
/// C_ab C_cd` with `C` the divisor-n score covariance. Gaussian mode:
/// `M[(a,b),(c,d)] = C_ac C_bd + C_ad C_bc`. Negative eigenvalues from
/// sampling noise are clipped to zero and the clipped mass recorded.
pub fn estimate_upsilon(
    s: &FunctionalSample,
    basis: &HsBasis,
    mode: UpsilonMode,
) -> Result<FourthMomentOperator> {
    if s.n_curves() < 2 {
        return Err(Error::InsufficientSample {
            context: "fourth-moment estimation",
            needed: 2,
            got: s.n_curves(),
        });
    }
    let scores = project_scores(s, basis)?;
    let q = basis.q;
    let dim = q * q;
    let n = s.n_curves();
    let nf = n as f64;

    // Outer-product rows y_j = vec(c_j c_j'), iterated in canonical order.
    let order = canonical_row_order(&scores);
    let mut outer = DMatrix::zeros(n, dim);
    for (row, &j) in order.iter().enumerate() {
        for a in 0..q {
            for b in 0..q {
                outer[(row, a * q + b)] = scores[(j, a)] * scores[(j, b)];
            }
        }
    }
    let mut ybar = vec![0.0; dim];
    for (col, slot) in ybar.iter_mut().enumerate() {
        let mut acc = 0.0;
        for row in 0..n {
            acc += outer[(row, col)];
        }
        *slot = acc / nf;
    }

    let mut matrix = DMatrix::zeros(dim, dim);
    match mode {
        UpsilonMode::Empirical => {
            // Divisor-n covariance of the outer-product rows.
            let mut centered = outer;
            for col in 0..dim {
                for row in 0..n {
                    centered[(row, col)] -= ybar[col];
                }
            }
            for u in 0..dim {
                for v in u..dim {
                    let mut acc = 0.0;
                    for row in 0..n {
                        acc += centered[(row, u)] * centered[(row, v)];
                    }
                    let x = acc / nf;
                    matrix[(u, v)] = x;
                    matrix[(v, u)] = x;
                }
            }
        }
        UpsilonMode::Gaussian => {
            // Score covariance is the reshaped mean of the outer rows.
            let c = |a: usize, b: usize| ybar[a * q + b];
            for u in 0..dim {
                let (a, b) = (u / q, u % q);
                for v in u..dim {
                    let (cc, dd) = (v / q, v % q);
                    let x = c(a, cc) * c(b, dd) + c(a, dd) * c(b, cc);
                    matrix[(u, v)] = x;
                    matrix[(v, u)] = x;
                }
            }
        }
    }

    let (matrix, clipped_mass) = clip_to_psd(matrix)?;
    Ok(FourthMomentOperator {
        basis: basis.clone(),
        matrix,
        n,
        clipped_mass,
    })
}

/// Clip negative eigenvalues to zero; reconstruct only when repair acted.
fn clip_to_psd(matrix: DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let (values, vectors) = symmetric_eigen(&matrix)?;
    let clipped_mass: f64 = values.iter().filter(|v| **v < 0.0).map(|v| -v).sum();
    if clipped_mass == 0.0 {
        return Ok((matrix, 0.0));
    }
    let dim = values.len();
    let mut repaired = DMatrix::zeros(dim, dim);
    for (l, &lambda) in values.iter().enumerate() {
        if lambda <= 0.0 {
            continue;
        }
        let col = vectors.column(l);
        for u in 0..dim {
            for v in u..dim {
                repaired[(u, v)] += lambda * (col[u] * col[v]);
            }
        }
    }
    for u in 0..dim {
        for v in 0..u {
            repaired[(u, v)] = repaired[(v, u)];
        }
    }
    Ok((repaired, clipped_mass))
}

fn check_common_basis(ups: &[FourthMomentOperator], context: &'static str) -> Result<()> {
    if let Some(first) = ups.first() {
        for other in ups.iter().skip(1) {
            if other.basis != first.basis {
                return Err(Error::GridMismatch(context));
            }
        }
    }
    Ok(())
}

fn check_taus(taus: &[f64], expected: usize, context: &'static str) -> Result<()> {
    if taus.len() != expected {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            got: taus.len(),
        });
    }
    if taus.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(Error::InvalidParameter(format!(
            "{context}: every tau must lie in (0, 1)"
        )));
    }
    if (taus.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "{context}: taus must sum to 1"
        )));
    }
    Ok(())
}

/// Pooled two-sample operator `tau_1^-1 M_1 + tau_2^-1 M_2`.
pub fn pooled_psi(ups: &[FourthMomentOperator], taus: &[f64]) -> Result<FourthMomentOperator> {
    if ups.len() != 2 {
        return Err(Error::InvalidParameter(format!(
            "pooled_psi takes exactly 2 operators, got {}",
            ups.len()
        )));
    }
    check_common_basis(ups, "pooled_psi basis")?;
    check_taus(taus, 2, "pooled_psi")?;
    // Entrywise division keeps the sum symmetric in the two populations at
    // the bit level (addition commutes; each term is computed identically).
    let dim = ups[0].matrix.nrows();
    let matrix = DMatrix::from_fn(dim, dim, |u, v| {
        ups[0].matrix[(u, v)] / taus[0] + ups[1].matrix[(u, v)] / taus[1]
    });
    Ok(FourthMomentOperator {
        basis: ups[0].basis.clone(),
        matrix,
        n: ups.iter().map(|u| u.n).sum(),
        clipped_mass: ups.iter().map(|u| u.clipped_mass).sum(),
    })
}

/// The k-sample block operator: a `(k-1) x (k-1)` grid of `q^2 x q^2`
/// blocks with `tau_(j+1)^-1 M_(j+1) + tau_1^-1 M_1` on the diagonal and
/// `tau_1^-1 M_1` off it.
#[derive(Debug, Clone)]
pub struct BlockOperator {
    basis: HsBasis,
    k: usize,
    matrix: DMatrix<f64>,
}

impl BlockOperator {
    pub fn basis(&self) -> &HsBasis {
        &self.basis
    }

    /// Number of populations.
    pub fn k(&self) -> usize {
        self.k
    }

    /// The assembled `(k-1) q^2` symmetric matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn eigenvalues(&self, max_terms: Option<usize>) -> Result<Vec<f64>> {
        psi_eigenvalues(&self.matrix, max_terms)
    }
}

/// Assemble the k-sample block operator from per-population fourth-moment
/// operators on a common basis. For `k = 2` the single block equals
/// [`pooled_psi`] exactly.
pub fn block_psi_w(ups: &[FourthMomentOperator], taus: &[f64]) -> Result<BlockOperator> {
    let k = ups.len();
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "block operator needs at least 2 populations, got {k}"
        )));
    }
    check_common_basis(ups, "block_psi_w basis")?;
    check_taus(taus, k, "block_psi_w")?;

    let dim = ups[0].matrix.nrows();
    let first = DMatrix::from_fn(dim, dim, |u, v| ups[0].matrix[(u, v)] / taus[0]);
    let mut matrix = DMatrix::zeros((k - 1) * dim, (k - 1) * dim);
    for bi in 0..(k - 1) {
        for bj in 0..(k - 1) {
            for u in 0..dim {
                for v in 0..dim {
                    let mut x = first[(u, v)];
                    if bi == bj {
                        x += ups[bi + 1].matrix[(u, v)] / taus[bi + 1];
                    }
                    matrix[(bi * dim + u, bj * dim + v)] = x;
                }
            }
        }
    }
    Ok(BlockOperator {
        basis: ups[0].basis.clone(),
        k,
        matrix,
    })
}

/// Positive eigenvalues of a symmetric matrix, nonincreasing, truncated to
/// `max_terms` when given.
pub fn psi_eigenvalues(matrix: &DMatrix<f64>, max_terms: Option<usize>) -> Result<Vec<f64>> {
    let (values, _) = symmetric_eigen(matrix)?;
    let mut out: Vec<f64> = values.into_iter().filter(|v| *v > 0.0).collect();
    out.reverse(); // ascending -> descending
    if let Some(cap) = max_terms {
        out.truncate(cap);
    }
    Ok(out)
}

/// Eigenvalues and eigenvectors of a fourth-moment (or block) matrix,
/// positive part only, nonincreasing. The vectors are coordinates in the
/// tensor basis and are needed to expand drift operators under local
/// alternatives.
#[derive(Debug, Clone)]
pub struct PsiEigen {
    pub values: Vec<f64>,
    /// One eigenvector per column, aligned with `values`.
    pub vectors: DMatrix<f64>,
}

/// Like [`psi_eigenvalues`] but keeping the eigenvectors.
pub fn psi_eigensystem(matrix: &DMatrix<f64>, max_terms: Option<usize>) -> Result<PsiEigen> {
    let (values, vectors) = symmetric_eigen(matrix)?;
    let dim = values.len();
    let mut keep: Vec<usize> = (0..dim).rev().filter(|&i| values[i] > 0.0).collect();
    if let Some(cap) = max_terms {
        keep.truncate(cap);
    }
    let mut out_values = Vec::with_capacity(keep.len());
    let mut out_vectors = DMatrix::zeros(dim, keep.len());
    for (col, &i) in keep.iter().enumerate() {
        out_values.push(values[i]);
        for r in 0..dim {
            out_vectors[(r, col)] = vectors[(r, i)];
        }
    }
    Ok(PsiEigen {
        values: out_values,
        vectors: out_vectors,
    })
}
