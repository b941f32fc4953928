//! Hilbert-space numerics on a common grid.
//!
//! Curves live on a [`Grid`] of strictly increasing points with nonnegative
//! quadrature weights; the inner product is the weighted sum
//! `<u, v> = sum_m w_m u(t_m) v(t_m)`. Integral operators are represented by
//! their kernel matrix `K[m, l] ~ k(t_m, t_l)` and act as
//! `(K u)(t_m) = sum_l w_l K[m, l] u(t_l)`. The Hilbert-Schmidt inner product
//! of two kernels is the doubly weighted sum `sum_{m,l} w_m w_l A[m,l] B[m,l]`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;

/// Relative symmetry tolerance for kernels entering an eigendecomposition.
pub const TOL_SYM: f64 = 1e-10;
/// Relative tolerance when checking positive semidefiniteness.
pub const TOL_PSD: f64 = 1e-8;
/// Default relative cutoff below which eigenvalues are dropped.
pub const DEFAULT_EIGEN_CUTOFF: f64 = 1e-12;

/// Discretization of a compact interval: strictly increasing points and
/// nonnegative quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    /// Grid with caller-supplied quadrature weights.
    pub fn with_weights(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        if weights.len() != points.len() {
            return Err(Error::DimensionMismatch {
                context: "grid weights",
                expected: points.len(),
                got: weights.len(),
            });
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidGrid("non-finite grid point".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(
                "points must be strictly increasing".into(),
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidGrid(
                "weights must be finite and nonnegative".into(),
            ));
        }
        if weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidGrid("weights must not all be zero".into()));
        }
        Ok(Grid { points, weights })
    }

    /// Grid with trapezoid-rule weights derived from the point spacing.
    pub fn with_trapezoid_weights(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        let p = points.len();
        let mut weights = vec![0.0; p];
        weights[0] = (points[1] - points[0]) / 2.0;
        weights[p - 1] = (points[p - 1] - points[p - 2]) / 2.0;
        for m in 1..p - 1 {
            weights[m] = (points[m + 1] - points[m - 1]) / 2.0;
        }
        Self::with_weights(points, weights)
    }

    /// Uniform grid of `p` points on `[a, b]` with trapezoid weights.
    pub fn uniform(a: f64, b: f64, p: usize) -> Result<Self> {
        if p < 2 || a.is_nan() || b.is_nan() || a >= b {
            return Err(Error::InvalidGrid(format!(
                "invalid uniform grid: [{a}, {b}] with {p} points"
            )));
        }
        let step = (b - a) / (p - 1) as f64;
        let points = (0..p).map(|m| a + step * m as f64).collect();
        Self::with_trapezoid_weights(points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Quadrature approximation of the L2 inner product of two curves.
    pub fn inner_product(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        if u.len() != self.len() {
            return Err(Error::DimensionMismatch {
                context: "inner_product lhs",
                expected: self.len(),
                got: u.len(),
            });
        }
        if v.len() != self.len() {
            return Err(Error::DimensionMismatch {
                context: "inner_product rhs",
                expected: self.len(),
                got: v.len(),
            });
        }
        let mut acc = 0.0;
        for m in 0..self.len() {
            // Associate as w * (u v) so the product commutes in u and v at
            // the bit level.
            acc += self.weights[m] * (u[m] * v[m]);
        }
        Ok(acc)
    }

    /// Quadrature L2 norm of a curve.
    pub fn norm(&self, u: &[f64]) -> Result<f64> {
        Ok(self.inner_product(u, u)?.sqrt())
    }
}

/// A sample of `n` curves observed on a common grid.
#[derive(Debug, Clone)]
pub struct FunctionalSample {
    grid: Grid,
    values: DMatrix<f64>,
    label: String,
}

impl FunctionalSample {
    /// `values` holds one curve per row, evaluated at the grid points.
    pub fn new(grid: Grid, values: DMatrix<f64>, label: impl Into<String>) -> Result<Self> {
        if values.ncols() != grid.len() {
            return Err(Error::DimensionMismatch {
                context: "sample columns vs grid",
                expected: grid.len(),
                got: values.ncols(),
            });
        }
        if values.nrows() == 0 {
            return Err(Error::InsufficientSample {
                context: "sample construction",
                needed: 1,
                got: 0,
            });
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "sample contains non-finite values".into(),
            ));
        }
        Ok(FunctionalSample {
            grid,
            values,
            label: label.into(),
        })
    }

    pub fn n_curves(&self) -> usize {
        self.values.nrows()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// The `j`-th curve as an owned vector.
    pub fn curve(&self, j: usize) -> Vec<f64> {
        self.values.row(j).iter().copied().collect()
    }

    /// Same curves under a new label.
    pub fn relabeled(&self, label: impl Into<String>) -> Self {
        FunctionalSample {
            grid: self.grid.clone(),
            values: self.values.clone(),
            label: label.into(),
        }
    }
}

/// An integral operator represented by its kernel matrix on a grid.
///
/// The kernel need not be symmetric (tensor products of two different curves
/// are not); estimators that produce covariance operators construct exactly
/// symmetric kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelOperator {
    grid: Grid,
    kernel: DMatrix<f64>,
}

impl KernelOperator {
    pub fn new(grid: Grid, kernel: DMatrix<f64>) -> Result<Self> {
        if kernel.nrows() != grid.len() || kernel.ncols() != grid.len() {
            return Err(Error::DimensionMismatch {
                context: "kernel vs grid",
                expected: grid.len(),
                got: kernel.nrows().max(kernel.ncols()),
            });
        }
        if kernel.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "kernel has non-finite entries".into(),
            ));
        }
        Ok(KernelOperator { grid, kernel })
    }

    /// Zero operator on a grid.
    pub fn zeros(grid: Grid) -> Self {
        let p = grid.len();
        KernelOperator {
            grid,
            kernel: DMatrix::zeros(p, p),
        }
    }

    /// Rank-one operator `u (x) v`, acting as `w -> <v, w> u`.
    pub fn tensor_product(u: &[f64], v: &[f64], grid: &Grid) -> Result<Self> {
        if u.len() != grid.len() || v.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                context: "tensor_product",
                expected: grid.len(),
                got: if u.len() != grid.len() {
                    u.len()
                } else {
                    v.len()
                },
            });
        }
        let p = grid.len();
        let kernel = DMatrix::from_fn(p, p, |m, l| u[m] * v[l]);
        Ok(KernelOperator {
            grid: grid.clone(),
            kernel,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    fn check_same_grid(&self, other: &Self, context: &'static str) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(context));
        }
        Ok(())
    }

    /// Apply the operator to a curve: `(K u)(t_m) = sum_l w_l K[m, l] u(t_l)`.
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.grid.len() {
            return Err(Error::DimensionMismatch {
                context: "apply",
                expected: self.grid.len(),
                got: u.len(),
            });
        }
        let p = self.grid.len();
        let w = self.grid.weights();
        let mut out = vec![0.0; p];
        for (m, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for l in 0..p {
                acc += w[l] * self.kernel[(m, l)] * u[l];
            }
            *slot = acc;
        }
        Ok(out)
    }

    /// Hilbert-Schmidt inner product `sum_{m,l} w_m w_l A[m,l] B[m,l]`.
    pub fn hs_inner(&self, other: &Self) -> Result<f64> {
        self.check_same_grid(other, "hs_inner")?;
        let p = self.grid.len();
        let w = self.grid.weights();
        let mut acc = 0.0;
        for m in 0..p {
            let mut row = 0.0;
            for (l, wl) in w.iter().enumerate() {
                row += wl * (self.kernel[(m, l)] * other.kernel[(m, l)]);
            }
            acc += w[m] * row;
        }
        Ok(acc)
    }

    /// Hilbert-Schmidt norm.
    pub fn hs_norm(&self) -> f64 {
        self.hs_inner(self).expect("same grid").max(0.0).sqrt()
    }

    /// Operator trace `sum_m w_m K[m, m]`.
    pub fn trace(&self) -> f64 {
        let w = self.grid.weights();
        (0..self.grid.len())
            .map(|m| w[m] * self.kernel[(m, m)])
            .sum()
    }

    /// Entrywise difference of two kernels on the same grid.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other, "operator difference")?;
        Ok(KernelOperator {
            grid: self.grid.clone(),
            kernel: &self.kernel - &other.kernel,
        })
    }

    /// Entrywise sum of two kernels on the same grid.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other, "operator sum")?;
        Ok(KernelOperator {
            grid: self.grid.clone(),
            kernel: &self.kernel + &other.kernel,
        })
    }

    /// Kernel scaled by a constant.
    pub fn scale(&self, c: f64) -> Self {
        KernelOperator {
            grid: self.grid.clone(),
            kernel: &self.kernel * c,
        }
    }

    /// Largest absolute asymmetry relative to the largest kernel entry.
    pub fn symmetry_error(&self) -> f64 {
        let p = self.grid.len();
        let mut max_entry: f64 = 0.0;
        let mut max_asym: f64 = 0.0;
        for m in 0..p {
            for l in 0..p {
                max_entry = max_entry.max(self.kernel[(m, l)].abs());
                if l > m {
                    max_asym = max_asym.max((self.kernel[(m, l)] - self.kernel[(l, m)]).abs());
                }
            }
        }
        if max_entry == 0.0 {
            0.0
        } else {
            max_asym / max_entry
        }
    }

    /// Smallest eigenvalue of the weighted kernel relative to the largest,
    /// for positive-semidefiniteness checks in tests and diagnostics.
    pub fn min_relative_eigenvalue(&self) -> Result<f64> {
        let eigensystem = eigen_decompose_keep_all(self)?;
        let max = eigensystem
            .iter()
            .fold(0.0_f64, |acc, &(value, _)| acc.max(value.abs()));
        let min = eigensystem
            .iter()
            .fold(f64::INFINITY, |acc, &(value, _)| acc.min(value));
        if max == 0.0 {
            Ok(0.0)
        } else {
            Ok(min / max)
        }
    }
}

/// Eigenvalues and w-orthonormal eigenfunctions of a symmetric kernel
/// operator, nonincreasing, with small and negative values removed.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    grid: Grid,
    eigenvalues: Vec<f64>,
    /// One eigenfunction per column, orthonormal in the weighted product.
    functions: DMatrix<f64>,
    clipped_negative_mass: f64,
    dropped_mass: f64,
}

impl EigenSystem {
    pub(crate) fn from_parts(
        grid: Grid,
        eigenvalues: Vec<f64>,
        functions: DMatrix<f64>,
        clipped_negative_mass: f64,
        dropped_mass: f64,
    ) -> Self {
        EigenSystem {
            grid,
            eigenvalues,
            functions,
            clipped_negative_mass,
            dropped_mass,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Retained eigenvalues, nonincreasing.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenfunctions as columns, aligned with `eigenvalues`.
    pub fn functions(&self) -> &DMatrix<f64> {
        &self.functions
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Total absolute mass of negative eigenvalues clipped to zero.
    pub fn clipped_negative_mass(&self) -> f64 {
        self.clipped_negative_mass
    }

    /// Total mass of nonnegative eigenvalues dropped by the cutoff.
    pub fn dropped_mass(&self) -> f64 {
        self.dropped_mass
    }

    /// The `l`-th eigenfunction as an owned vector.
    pub fn function(&self, l: usize) -> Vec<f64> {
        self.functions.column(l).iter().copied().collect()
    }

    /// Rebuild the kernel `sum_l lambda_l phi_l (x) phi_l`.
    pub fn reconstruct(&self) -> KernelOperator {
        let p = self.grid.len();
        let mut kernel = DMatrix::zeros(p, p);
        for (l, &lambda) in self.eigenvalues.iter().enumerate() {
            let phi = self.functions.column(l);
            for m in 0..p {
                for r in m..p {
                    let add = lambda * (phi[m] * phi[r]);
                    kernel[(m, r)] += add;
                }
            }
        }
        for m in 0..p {
            for r in 0..m {
                kernel[(m, r)] = kernel[(r, m)];
            }
        }
        KernelOperator {
            grid: self.grid.clone(),
            kernel,
        }
    }
}

/// Eigendecomposition of a symmetric kernel operator.
///
/// Solves the symmetric problem for `W^(1/2) K W^(1/2)` and maps eigenvectors
/// back through `W^(-1/2)`, so the returned eigenfunctions are orthonormal in
/// the weighted inner product. Negative eigenvalues are clipped to zero and
/// recorded; eigenvalues at or below `rel_cutoff * lambda_max` are dropped.
pub fn eigen_decompose(op: &KernelOperator, rel_cutoff: f64) -> Result<EigenSystem> {
    if rel_cutoff < 0.0 {
        return Err(Error::InvalidParameter("eigen cutoff must be >= 0".into()));
    }
    if op.symmetry_error() > TOL_SYM {
        return Err(Error::InvalidParameter(format!(
            "kernel is not symmetric: relative asymmetry {:.3e}",
            op.symmetry_error()
        )));
    }
    let pairs = eigen_decompose_keep_all(op)?;
    let lambda_max = pairs.iter().fold(0.0_f64, |acc, &(v, _)| acc.max(v));
    let cutoff = rel_cutoff * lambda_max;

    let mut clipped = 0.0;
    let mut dropped = 0.0;
    let mut kept: Vec<(f64, Vec<f64>)> = Vec::new();
    for (value, func) in pairs {
        let clipped_value = if value < 0.0 {
            clipped += -value;
            0.0
        } else {
            value
        };
        if lambda_max <= 0.0 || clipped_value <= cutoff {
            dropped += clipped_value;
        } else {
            kept.push((clipped_value, func));
        }
    }

    let p = op.grid.len();
    let mut functions = DMatrix::zeros(p, kept.len());
    let mut eigenvalues = Vec::with_capacity(kept.len());
    for (l, (value, func)) in kept.into_iter().enumerate() {
        eigenvalues.push(value);
        for m in 0..p {
            functions[(m, l)] = func[m];
        }
    }
    Ok(EigenSystem {
        grid: op.grid.clone(),
        eigenvalues,
        functions,
        clipped_negative_mass: clipped,
        dropped_mass: dropped,
    })
}

/// All eigenpairs (descending, sign-normalized, mapped back to curve space),
/// without clipping or cutoff.
fn eigen_decompose_keep_all(op: &KernelOperator) -> Result<Vec<(f64, Vec<f64>)>> {
    let p = op.grid.len();
    let w = op.grid.weights();
    if w.iter().any(|&x| x <= 0.0) {
        return Err(Error::InvalidGrid(
            "eigendecomposition requires strictly positive weights".into(),
        ));
    }
    let sqrt_w: Vec<f64> = w.iter().map(|&x| x.sqrt()).collect();

    // M = W^(1/2) K W^(1/2), built exactly symmetric from the upper triangle.
    let mut m = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in a..p {
            let x = sqrt_w[a] * sqrt_w[b] * op.kernel[(a, b)];
            m[(a, b)] = x;
            m[(b, a)] = x;
        }
    }
    let (values, vectors) = symmetric_eigen(&m)?;

    // Descending order; the solver's output is ascending, so reversing keeps
    // the solver's ordering of equal eigenvalues deterministic.
    let mut pairs: Vec<(f64, Vec<f64>)> = Vec::with_capacity(p);
    for idx in (0..p).rev() {
        let mut func: Vec<f64> = (0..p).map(|r| vectors[(r, idx)] / sqrt_w[r]).collect();
        normalize_sign(&mut func, w);
        pairs.push((values[idx], func));
    }
    Ok(pairs)
}

/// Fix the sign so the weighted integral of the eigenfunction is positive;
/// when that integral is numerically zero, the first significantly nonzero
/// value is made positive instead.
fn normalize_sign(func: &mut [f64], weights: &[f64]) {
    let integral: f64 = func.iter().zip(weights).map(|(f, w)| w * f).sum();
    let total_weight: f64 = weights.iter().sum();
    let flip = if integral.abs() > 1e-8 * total_weight.sqrt() {
        integral < 0.0
    } else {
        let max_abs = func.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
        match func.iter().find(|x| x.abs() > 1e-8 * max_abs) {
            Some(first) => *first < 0.0,
            None => false,
        }
    };
    if flip {
        for x in func.iter_mut() {
            *x = -*x;
        }
    }
}
