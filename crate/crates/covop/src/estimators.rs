//! Covariance-operator estimators: empirical, kernel-smoothed and spatial
//! (robust), plus the sample mean and the spatial median.
//!
//! Every cross-curve reduction iterates the curves in canonical
//! (lexicographic) order, so reordering the observations cannot change any
//! result, bit for bit.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{FunctionalSample, KernelOperator};
use crate::linalg::canonical_row_order;

/// Rows of the sample in canonical order, optionally centered at `center`.
fn ordered_rows(s: &FunctionalSample) -> (Vec<usize>, &DMatrix<f64>) {
    (canonical_row_order(s.values()), s.values())
}

/// Pointwise mean curve.
pub fn sample_mean(s: &FunctionalSample) -> Vec<f64> {
    let (order, values) = ordered_rows(s);
    let p = s.grid().len();
    let n = s.n_curves() as f64;
    let mut mean = vec![0.0; p];
    for &j in &order {
        for (m, slot) in mean.iter_mut().enumerate() {
            *slot += values[(j, m)];
        }
    }
    for slot in mean.iter_mut() {
        *slot /= n;
    }
    mean
}

/// Sample covariance operator with divisor `n`:
/// `K[m, l] = (1/n) sum_j (X_j(t_m) - mean(t_m)) (X_j(t_l) - mean(t_l))`.
pub fn sample_cov(s: &FunctionalSample) -> Result<KernelOperator> {
    if s.n_curves() < 2 {
        return Err(Error::InsufficientSample {
            context: "sample covariance",
            needed: 2,
            got: s.n_curves(),
        });
    }
    let (order, values) = ordered_rows(s);
    let p = s.grid().len();
    let n = s.n_curves();
    let mean = sample_mean(s);

    // Centered curves, rows already in canonical order.
    let mut centered = DMatrix::zeros(n, p);
    for (row, &j) in order.iter().enumerate() {
        for m in 0..p {
            centered[(row, m)] = values[(j, m)] - mean[m];
        }
    }

    let mut kernel = DMatrix::zeros(p, p);
    let nf = n as f64;
    for m in 0..p {
        for l in m..p {
            let mut acc = 0.0;
            for j in 0..n {
                acc += centered[(j, m)] * centered[(j, l)];
            }
            let x = acc / nf;
            kernel[(m, l)] = x;
            kernel[(l, m)] = x;
        }
    }
    KernelOperator::new(s.grid().clone(), kernel)
}

/// Symmetric smoothing kernels for curve pre-smoothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingKernel {
    Epanechnikov,
    Gaussian,
    Uniform,
}

impl SmoothingKernel {
    /// Kernel density at `u` (bandwidth 1).
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            SmoothingKernel::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            SmoothingKernel::Gaussian => (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            SmoothingKernel::Uniform => {
                if u.abs() <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SmoothingKernel::Epanechnikov => "epanechnikov",
            SmoothingKernel::Gaussian => "gaussian",
            SmoothingKernel::Uniform => "uniform",
        }
    }
}

impl std::str::FromStr for SmoothingKernel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epanechnikov" => Ok(SmoothingKernel::Epanechnikov),
            "gaussian" => Ok(SmoothingKernel::Gaussian),
            "uniform" => Ok(SmoothingKernel::Uniform),
            other => Err(Error::InvalidParameter(format!(
                "unknown smoothing kernel '{other}'"
            ))),
        }
    }
}

/// Convolve every curve with the discrete kernel `K_h(t_m - t_l)`, with the
/// discrete weights renormalized to sum to one at each target point so the
/// boundary does not bias the smoothed curve.
pub fn smoothed_curves(
    s: &FunctionalSample,
    kernel: SmoothingKernel,
    bandwidth: f64,
) -> Result<FunctionalSample> {
    if !bandwidth.is_finite() || bandwidth <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    let grid = s.grid();
    let p = grid.len();
    let points = grid.points();
    let w = grid.weights();

    // Per target point: the nonzero normalized weights of the discrete kernel.
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(p);
    for m in 0..p {
        let mut raw: Vec<(usize, f64)> = Vec::new();
        for l in 0..p {
            let k = kernel.eval((points[m] - points[l]) / bandwidth) / bandwidth;
            let val = w[l] * k;
            if val > 0.0 {
                raw.push((l, val));
            }
        }
        let total: f64 = raw.iter().map(|(_, v)| v).sum();
        if total <= 0.0 {
            return Err(Error::NumericalFailure(format!(
                "empty smoothing window at grid point {}",
                points[m]
            )));
        }
        for entry in raw.iter_mut() {
            entry.1 /= total;
        }
        rows.push(raw);
    }

    let n = s.n_curves();
    let values = s.values();
    let mut smoothed = DMatrix::zeros(n, p);
    for j in 0..n {
        for (m, row) in rows.iter().enumerate() {
            let mut acc = 0.0;
            for &(l, weight) in row {
                acc += weight * values[(j, l)];
            }
            smoothed[(j, m)] = acc;
        }
    }
    FunctionalSample::new(grid.clone(), smoothed, s.label())
}

/// Covariance of the kernel-smoothed trajectories.
pub fn smoothed_cov(
    s: &FunctionalSample,
    kernel: SmoothingKernel,
    bandwidth: f64,
) -> Result<KernelOperator> {
    sample_cov(&smoothed_curves(s, kernel, bandwidth)?)
}

/// Result of the spatial-median iteration.
#[derive(Debug, Clone)]
pub struct SpatialMedian {
    pub curve: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
}

/// Spatial median: the curve minimizing `sum_j |X_j - mu|`, computed by
/// Weiszfeld iteration started at the coordinatewise median.
///
/// When an iterate lands on a data curve the iteration either stops there
/// (if the subgradient condition certifies optimality) or steps away along
/// the negative subgradient.
pub fn spatial_median(s: &FunctionalSample, tol: f64, max_iter: usize) -> Result<SpatialMedian> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "spatial median tolerance must be positive, got {tol}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be >= 1".into()));
    }
    let (order, values) = ordered_rows(s);
    let grid = s.grid();
    let p = grid.len();
    let n = s.n_curves();

    let scale = {
        let mut max_norm: f64 = 0.0;
        for j in 0..n {
            let row: Vec<f64> = (0..p).map(|m| values[(j, m)]).collect();
            max_norm = max_norm.max(grid.norm(&row)?);
        }
        max_norm
    };
    let coincidence_threshold = 1e-12 * scale;

    // Start at the coordinatewise median.
    let mut mu = vec![0.0; p];
    let mut column = vec![0.0; n];
    for (m, slot) in mu.iter_mut().enumerate() {
        for (row, &j) in order.iter().enumerate() {
            column[row] = values[(j, m)];
        }
        column.sort_by(f64::total_cmp);
        *slot = if n % 2 == 1 {
            column[n / 2]
        } else {
            (column[n / 2 - 1] + column[n / 2]) / 2.0
        };
    }

    let mut iterations = 0;
    let mut gradient_norm = f64::INFINITY;
    let mut converged = false;
    let mut diff = vec![0.0; p];

    while iterations < max_iter {
        iterations += 1;

        let mut coincident = 0usize;
        let mut direction = vec![0.0; p]; // sum of unit vectors toward the data
        let mut weighted = vec![0.0; p]; // sum of X_j / d_j
        let mut inv_total = 0.0;
        for &j in &order {
            for (m, d) in diff.iter_mut().enumerate() {
                *d = values[(j, m)] - mu[m];
            }
            let dist = grid.norm(&diff)?;
            if dist <= coincidence_threshold {
                coincident += 1;
                continue;
            }
            for m in 0..p {
                direction[m] += diff[m] / dist;
                weighted[m] += values[(j, m)] / dist;
            }
            inv_total += 1.0 / dist;
        }
        gradient_norm = grid.norm(&direction)?;

        if coincident > 0 {
            // Subgradient optimality at a data point: the pull of the other
            // curves does not exceed the multiplicity of the coincident ones.
            if gradient_norm <= coincident as f64 + tol {
                converged = true;
                gradient_norm = 0.0;
                break;
            }
            // Step away along the negative subgradient and continue.
            let step = (10.0 * coincidence_threshold).max(1e-9 * scale.max(1.0));
            for m in 0..p {
                mu[m] += step * direction[m] / gradient_norm;
            }
            continue;
        }

        if gradient_norm <= tol {
            converged = true;
            break;
        }
        if inv_total == 0.0 {
            break;
        }
        for m in 0..p {
            mu[m] = weighted[m] / inv_total;
        }
    }

    // Re-evaluate the gradient at the final iterate when the loop ended on
    // an update rather than a convergence check.
    if !converged {
        let mut direction = vec![0.0; p];
        for &j in &order {
            for (m, d) in diff.iter_mut().enumerate() {
                *d = values[(j, m)] - mu[m];
            }
            let dist = grid.norm(&diff)?;
            if dist > coincidence_threshold {
                for m in 0..p {
                    direction[m] += diff[m] / dist;
                }
            }
        }
        gradient_norm = grid.norm(&direction)?;
        converged = gradient_norm <= tol;
    }

    Ok(SpatialMedian {
        curve: mu,
        converged,
        iterations,
        gradient_norm,
    })
}

/// Spatial covariance estimate with its dropped-term count.
#[derive(Debug, Clone)]
pub struct SpatialCovariance {
    pub operator: KernelOperator,
    /// Curves skipped because they coincide with the center.
    pub dropped: usize,
}

/// Spatial (sign) covariance operator around `center`:
/// `(1/n) sum_j (X_j - c) (x) (X_j - c) / |X_j - c|^2`.
///
/// Terms with `|X_j - c|` below `1e-12 * scale` are dropped and counted, so
/// the trace equals (retained terms) / n.
pub fn spatial_cov(s: &FunctionalSample, center: &[f64]) -> Result<SpatialCovariance> {
    let grid = s.grid();
    let p = grid.len();
    if center.len() != p {
        return Err(Error::DimensionMismatch {
            context: "spatial_cov center",
            expected: p,
            got: center.len(),
        });
    }
    let (order, values) = ordered_rows(s);
    let n = s.n_curves();

    let mut scale: f64 = 0.0;
    for j in 0..n {
        let row: Vec<f64> = (0..p).map(|m| values[(j, m)]).collect();
        scale = scale.max(grid.norm(&row)?);
    }
    let threshold = 1e-12 * scale;

    let mut kernel = DMatrix::zeros(p, p);
    let mut dropped = 0usize;
    let mut unit = vec![0.0; p];
    for &j in &order {
        for (m, slot) in unit.iter_mut().enumerate() {
            *slot = values[(j, m)] - center[m];
        }
        let dist = grid.norm(&unit)?;
        if dist <= threshold {
            dropped += 1;
            continue;
        }
        for slot in unit.iter_mut() {
            *slot /= dist;
        }
        for m in 0..p {
            for l in m..p {
                kernel[(m, l)] += unit[m] * unit[l];
            }
        }
    }
    if dropped == n {
        return Err(Error::InvalidParameter(
            "all curves coincide with the center".into(),
        ));
    }
    let nf = n as f64;
    for m in 0..p {
        for l in m..p {
            kernel[(m, l)] /= nf;
            kernel[(l, m)] = kernel[(m, l)];
        }
    }
    Ok(SpatialCovariance {
        operator: KernelOperator::new(grid.clone(), kernel)?,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::Grid;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn sample_from_rows(grid: &Grid, rows: &[Vec<f64>]) -> FunctionalSample {
        let n = rows.len();
        let p = grid.len();
        let values = DMatrix::from_fn(n, p, |j, m| rows[j][m]);
        FunctionalSample::new(grid.clone(), values, "test").unwrap()
    }

    #[test]
    fn mean_of_identical_curves() {
        let g = Grid::uniform(0.0, 1.0, 4).unwrap();
        let c = vec![1.0, -2.0, 0.5, 3.0];
        let s = sample_from_rows(&g, &[c.clone(), c.clone(), c.clone()]);
        assert_eq!(sample_mean(&s), c);
    }

    #[test]
    fn mean_of_opposite_pair_is_zero() {
        let g = Grid::uniform(0.0, 1.0, 3).unwrap();
        let u = vec![1.0, 2.0, -0.5];
        let neg: Vec<f64> = u.iter().map(|x| -x).collect();
        let s = sample_from_rows(&g, &[u, neg]);
        for x in sample_mean(&s) {
            assert_eq!(x, 0.0);
        }
    }

    #[test]
    fn mean_matches_elementwise_average() {
        let g = Grid::uniform(0.0, 1.0, 4).unwrap();
        let rows = vec![
            vec![1.0, 0.0, 2.0, -1.0],
            vec![0.5, 3.0, -2.0, 1.0],
            vec![-1.5, 1.0, 0.0, 0.5],
        ];
        let s = sample_from_rows(&g, &rows);
        let mean = sample_mean(&s);
        for m in 0..4 {
            let want = (rows[0][m] + rows[1][m] + rows[2][m]) / 3.0;
            assert!((mean[m] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn cov_of_identical_curves_is_zero() {
        let g = Grid::uniform(0.0, 1.0, 5).unwrap();
        let c = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let s = sample_from_rows(&g, &[c.clone(), c]);
        let op = sample_cov(&s).unwrap();
        assert_eq!(op.hs_norm(), 0.0);
    }

    #[test]
    fn cov_of_opposite_pair_is_rank_one() {
        let g = Grid::uniform(0.0, 1.0, 4).unwrap();
        let u = vec![1.0, -1.0, 0.5, 2.0];
        let neg: Vec<f64> = u.iter().map(|x| -x).collect();
        let s = sample_from_rows(&g, &[u.clone(), neg]);
        let op = sample_cov(&s).unwrap();
        let want = KernelOperator::tensor_product(&u, &u, &g).unwrap();
        assert!(op.sub(&want).unwrap().hs_norm() < 1e-14);
    }

    #[test]
    fn cov_matches_outer_product_oracle() {
        let g = Grid::uniform(0.0, 1.0, 3).unwrap();
        let mut rng = crate::rng::stream_rng(5, &[1]);
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|_| {
                (0..3)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        let s = sample_from_rows(&g, &rows);
        let op = sample_cov(&s).unwrap();
        // Brute-force (1/n) sum of outer products of centered curves.
        let mut mean = [0.0; 3];
        for row in &rows {
            for m in 0..3 {
                mean[m] += row[m] / 5.0;
            }
        }
        for m in 0..3 {
            for l in 0..3 {
                let mut acc = 0.0;
                for row in &rows {
                    acc += (row[m] - mean[m]) * (row[l] - mean[l]);
                }
                acc /= 5.0;
                assert!((op.kernel()[(m, l)] - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cov_needs_two_curves() {
        let g = Grid::uniform(0.0, 1.0, 3).unwrap();
        let s = sample_from_rows(&g, &[vec![1.0, 2.0, 3.0]]);
        assert!(matches!(
            sample_cov(&s),
            Err(Error::InsufficientSample { .. })
        ));
    }

    #[test]
    fn cov_trace_identity() {
        let g = Grid::uniform(0.0, 1.0, 6).unwrap();
        let mut rng = crate::rng::stream_rng(6, &[2]);
        let rows: Vec<Vec<f64>> = (0..7)
            .map(|_| (0..6).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let s = sample_from_rows(&g, &rows);
        let op = sample_cov(&s).unwrap();
        let mean = sample_mean(&s);
        let mut want = 0.0;
        for row in &rows {
            let centered: Vec<f64> = row.iter().zip(&mean).map(|(x, m)| x - m).collect();
            want += g.inner_product(&centered, &centered).unwrap();
        }
        want /= rows.len() as f64;
        assert!(((op.trace() - want) / want).abs() < 1e-10);
    }

    #[test]
    fn cov_is_permutation_invariant_bitwise() {
        let g = Grid::uniform(0.0, 1.0, 5).unwrap();
        let mut rng = crate::rng::stream_rng(9, &[3]);
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let mut shuffled = rows.clone();
        shuffled.reverse();
        shuffled.swap(0, 2);
        let a = sample_cov(&sample_from_rows(&g, &rows)).unwrap();
        let b = sample_cov(&sample_from_rows(&g, &shuffled)).unwrap();
        assert_eq!(a.kernel(), b.kernel());
    }

    #[test]
    fn cov_centering_invariance() {
        let g = Grid::uniform(0.0, 1.0, 4).unwrap();
        let mut rng = crate::rng::stream_rng(10, &[4]);
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let shift = vec![5.0, -3.0, 0.25, 1.0];
        let shifted: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().zip(&shift).map(|(x, c)| x + c).collect())
            .collect();
        let a = sample_cov(&sample_from_rows(&g, &rows)).unwrap();
        let b = sample_cov(&sample_from_rows(&g, &shifted)).unwrap();
        assert!(a.sub(&b).unwrap().hs_norm() < 1e-12);
    }

    #[test]
    fn smoothing_with_tiny_bandwidth_is_identity() {
        let g = Grid::uniform(0.0, 1.0, 9).unwrap();
        let mut rng = crate::rng::stream_rng(11, &[5]);
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..9).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let s = sample_from_rows(&g, &rows);
        // Bandwidth below half the spacing: the Epanechnikov window contains
        // only the target point and the renormalized weight is exactly one.
        let h = 0.04;
        let smoothed = smoothed_curves(&s, SmoothingKernel::Epanechnikov, h).unwrap();
        assert_eq!(smoothed.values(), s.values());
        let a = sample_cov(&s).unwrap();
        let b = smoothed_cov(&s, SmoothingKernel::Epanechnikov, h).unwrap();
        assert_eq!(a.kernel(), b.kernel());
    }

    #[test]
    fn smoothing_identical_curves_gives_zero_cov() {
        let g = Grid::uniform(0.0, 1.0, 8).unwrap();
        let rows = vec![vec![2.0; 8], vec![2.0; 8], vec![2.0; 8]];
        let s = sample_from_rows(&g, &rows);
        let op = smoothed_cov(&s, SmoothingKernel::Epanechnikov, 0.3).unwrap();
        assert_eq!(op.hs_norm(), 0.0);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn interior_smoothing_matches_direct_convolution() {
        let g = Grid::uniform(0.0, 1.0, 21).unwrap();
        let rows: Vec<Vec<f64>> = vec![
            g.points().iter().map(|t| 2.0 * t).collect(),
            g.points().iter().map(|t| -0.5 * t).collect(),
        ];
        let s = sample_from_rows(&g, &rows);
        let h = 0.12;
        let smoothed = smoothed_curves(&s, SmoothingKernel::Epanechnikov, h).unwrap();
        // Direct renormalized discrete convolution oracle at interior points.
        for j in 0..2 {
            for m in 5..16 {
                let mut num = 0.0;
                let mut den = 0.0;
                for l in 0..21 {
                    let k =
                        SmoothingKernel::Epanechnikov.eval((g.points()[m] - g.points()[l]) / h) / h;
                    num += g.weights()[l] * k * rows[j][l];
                    den += g.weights()[l] * k;
                }
                let want = num / den;
                assert!((smoothed.values()[(j, m)] - want).abs() < 1e-12);
                // Linear curves stay linear in the interior under a symmetric
                // kernel on a uniform grid.
                assert!((want - rows[j][m]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_bad_bandwidth() {
        let g = Grid::uniform(0.0, 1.0, 5).unwrap();
        let s = sample_from_rows(&g, &[vec![0.0; 5], vec![1.0; 5]]);
        assert!(smoothed_curves(&s, SmoothingKernel::Gaussian, 0.0).is_err());
        assert!(smoothed_curves(&s, SmoothingKernel::Gaussian, -1.0).is_err());
    }

    #[test]
    fn spatial_median_of_symmetric_sample() {
        let g = Grid::uniform(0.0, 1.0, 6).unwrap();
        let c: Vec<f64> = g.points().iter().map(|t| 1.0 + t).collect();
        let mut rng = crate::rng::stream_rng(13, &[6]);
        let mut rows = Vec::new();
        for _ in 0..4 {
            let u: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            rows.push(c.iter().zip(&u).map(|(a, b)| a + b).collect());
            rows.push(c.iter().zip(&u).map(|(a, b)| a - b).collect());
        }
        let s = sample_from_rows(&g, &rows);
        let med = spatial_median(&s, 1e-10, 500).unwrap();
        assert!(med.converged);
        for (x, want) in med.curve.iter().zip(&c) {
            assert!((x - want).abs() < 1e-8);
        }
    }

    #[test]
    fn spatial_median_single_curve() {
        let g = Grid::uniform(0.0, 1.0, 3).unwrap();
        let c = vec![1.0, 2.0, 3.0];
        let s = sample_from_rows(&g, std::slice::from_ref(&c));
        let med = spatial_median(&s, 1e-8, 100).unwrap();
        assert!(med.converged);
        assert_eq!(med.curve, c);
    }

    #[test]
    fn spatial_median_matches_grid_search() {
        // Planar 4-point Fermat problem on a 2-point grid.
        let g = Grid::uniform(0.0, 1.0, 2).unwrap();
        let rows = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.2],
            vec![0.1, 1.0],
            vec![0.9, 1.1],
        ];
        let s = sample_from_rows(&g, &rows);
        let med = spatial_median(&s, 1e-12, 2000).unwrap();
        let objective = |x: f64, y: f64| -> f64 {
            rows.iter()
                .map(|r| g.norm(&[r[0] - x, r[1] - y]).unwrap())
                .sum()
        };
        // Dense grid search over the bounding box.
        let mut best = f64::INFINITY;
        for i in 0..=400 {
            for j in 0..=400 {
                let x = -0.1 + 1.2 * i as f64 / 400.0;
                let y = -0.1 + 1.3 * j as f64 / 400.0;
                best = best.min(objective(x, y));
            }
        }
        let got = objective(med.curve[0], med.curve[1]);
        assert!(got <= best + 1e-9, "got {got}, grid best {best}");
        assert!(best - got <= 1e-4, "got {got}, grid best {best}");
    }

    #[test]
    fn spatial_median_objective_beats_mean_and_data() {
        let g = Grid::uniform(0.0, 1.0, 5).unwrap();
        let mut rng = crate::rng::stream_rng(17, &[8]);
        let rows: Vec<Vec<f64>> = (0..9)
            .map(|_| (0..5).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let s = sample_from_rows(&g, &rows);
        let med = spatial_median(&s, 1e-10, 1000).unwrap();
        let objective = |mu: &[f64]| -> f64 {
            rows.iter()
                .map(|r| {
                    let d: Vec<f64> = r.iter().zip(mu).map(|(a, b)| a - b).collect();
                    g.norm(&d).unwrap()
                })
                .sum()
        };
        let at_median = objective(&med.curve);
        assert!(at_median <= objective(&sample_mean(&s)) + 1e-9);
        for row in &rows {
            assert!(at_median <= objective(row) + 1e-9);
        }
    }

    #[test]
    fn spatial_cov_trace_is_retained_fraction() {
        let g = Grid::uniform(0.0, 1.0, 7).unwrap();
        let mut rng = crate::rng::stream_rng(19, &[9]);
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..7).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let s = sample_from_rows(&g, &rows);
        let med = spatial_median(&s, 1e-10, 500).unwrap();
        let sc = spatial_cov(&s, &med.curve).unwrap();
        assert_eq!(sc.dropped, 0);
        assert!((sc.operator.trace() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn spatial_cov_of_opposite_pair() {
        let g = Grid::uniform(0.0, 1.0, 4).unwrap();
        let u = vec![1.0, 0.5, -2.0, 0.3];
        let neg: Vec<f64> = u.iter().map(|x| -x).collect();
        let s = sample_from_rows(&g, &[u.clone(), neg]);
        let sc = spatial_cov(&s, &[0.0; 4]).unwrap();
        let norm2 = g.inner_product(&u, &u).unwrap();
        let want = KernelOperator::tensor_product(&u, &u, &g)
            .unwrap()
            .scale(1.0 / norm2);
        assert!(sc.operator.sub(&want).unwrap().hs_norm() < 1e-12);
    }

    #[test]
    fn spatial_cov_drops_center_matches() {
        let g = Grid::uniform(0.0, 1.0, 3).unwrap();
        let c = vec![1.0, 1.0, 1.0];
        let s = sample_from_rows(&g, &[c.clone(), vec![2.0, 0.0, 1.0], vec![0.0, 2.0, 1.0]]);
        let sc = spatial_cov(&s, &c).unwrap();
        assert_eq!(sc.dropped, 1);
        assert!((sc.operator.trace() - 2.0 / 3.0).abs() < 1e-12);
        // All curves at the center: error.
        let s = sample_from_rows(&g, &[c.clone(), c.clone()]);
        assert!(spatial_cov(&s, &c).is_err());
    }

    #[test]
    fn spatial_cov_equal_lambda_gaussian_components() {
        // Two-component model with equal eigenvalues: by symmetry both
        // spatial eigenvalues are 1/2. Monte Carlo oracle.
        let g = Grid::uniform(0.0, 1.0, 16).unwrap();
        let ones: Vec<f64> = vec![1.0; 16];
        let phi1: Vec<f64> = {
            let norm = g.norm(&ones).unwrap();
            ones.iter().map(|x| x / norm).collect()
        };
        let phi2: Vec<f64> = {
            let raw: Vec<f64> = g.points().to_vec();
            let c = g.inner_product(&raw, &phi1).unwrap();
            let ortho: Vec<f64> = raw.iter().zip(&phi1).map(|(r, p)| r - c * p).collect();
            let norm = g.norm(&ortho).unwrap();
            ortho.iter().map(|x| x / norm).collect()
        };
        let mut rng = crate::rng::stream_rng(23, &[10]);
        let n = 20000;
        let mut values = DMatrix::zeros(n, 16);
        for j in 0..n {
            let f1: f64 = rng.sample(StandardNormal);
            let f2: f64 = rng.sample(StandardNormal);
            for m in 0..16 {
                values[(j, m)] = f1 * phi1[m] + f2 * phi2[m];
            }
        }
        let s = FunctionalSample::new(g.clone(), values, "mc").unwrap();
        let sc = spatial_cov(&s, &[0.0; 16]).unwrap();
        let sys = crate::hilbert::eigen_decompose(&sc.operator, 1e-10).unwrap();
        assert_eq!(sys.len(), 2);
        assert!((sys.eigenvalues()[0] - 0.5).abs() < 0.02);
        assert!((sys.eigenvalues()[1] - 0.5).abs() < 0.02);
    }

    #[test]
    fn smoothing_kernels_are_densities() {
        // Each kernel integrates to about one over a fine grid.
        for kernel in [
            SmoothingKernel::Epanechnikov,
            SmoothingKernel::Gaussian,
            SmoothingKernel::Uniform,
        ] {
            let step = 0.001;
            let mut integral = 0.0;
            let mut u = -8.0;
            while u <= 8.0 {
                integral += kernel.eval(u) * step;
                u += step;
            }
            assert!((integral - 1.0).abs() < 1e-2, "{kernel:?}: {integral}");
        }
    }
}
