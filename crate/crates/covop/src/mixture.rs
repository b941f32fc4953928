//! Weighted chi-square mixtures `U = sum_l theta_l (Z_l + delta_l)^2`.
//!
//! These mixtures are the null and local-alternative reference laws of the
//! covariance tests. Sampling is Monte Carlo with one counter-based RNG
//! stream per draw, so results do not depend on scheduling; the
//! moment-matched CDF is an independent analytic cross-check.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{domain, stream_rng};
use crate::special::regularized_lower_gamma;

/// Default number of Monte Carlo draws for p-values and quantiles.
pub const DEFAULT_N_BOOT: usize = 5000;

/// A finite mixture `sum_l theta_l (Z_l + delta_l)^2` with independent
/// standard normal `Z_l`, nonincreasing nonnegative weights `theta_l` and
/// noncentral shifts `delta_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquareMixture {
    weights: Vec<f64>,
    shifts: Vec<f64>,
}

impl ChiSquareMixture {
    /// Central mixture with the given weights.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let shifts = vec![0.0; weights.len()];
        Self::noncentral(weights, shifts)
    }

    /// Noncentral mixture; `shifts[l]` is `delta_l`.
    pub fn noncentral(weights: Vec<f64>, shifts: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter(
                "mixture needs at least one weight".into(),
            ));
        }
        if shifts.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                context: "mixture shifts",
                expected: weights.len(),
                got: shifts.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParameter(
                "mixture weights must be finite and nonnegative".into(),
            ));
        }
        if weights.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidParameter(
                "mixture weights must be nonincreasing".into(),
            ));
        }
        if shifts.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidParameter(
                "mixture shifts must be finite".into(),
            ));
        }
        Ok(ChiSquareMixture { weights, shifts })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn shifts(&self) -> &[f64] {
        &self.shifts
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `E U = sum theta_l (1 + delta_l^2)`.
    pub fn mean(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.shifts)
            .map(|(t, d)| t * (1.0 + d * d))
            .sum()
    }

    /// `Var U = 2 sum theta_l^2 (1 + 2 delta_l^2)`.
    pub fn variance(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.shifts)
            .map(|(t, d)| 2.0 * t * t * (1.0 + 2.0 * d * d))
            .sum()
    }

    fn draw_one(&self, seed: u64, index: u64) -> f64 {
        let mut rng = stream_rng(seed, &[domain::MIXTURE, index]);
        let mut acc = 0.0;
        for (t, d) in self.weights.iter().zip(&self.shifts) {
            let z: f64 = StandardNormal.sample(&mut rng);
            let shifted = z + d;
            acc += t * (shifted * shifted);
        }
        acc
    }

    /// `count` independent draws of the mixture; deterministic per seed and
    /// independent of how the work is scheduled.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<f64> {
        if count >= 1024 {
            (0..count)
                .into_par_iter()
                .map(|r| self.draw_one(seed, r as u64))
                .collect()
        } else {
            (0..count).map(|r| self.draw_one(seed, r as u64)).collect()
        }
    }

    /// Monte Carlo p-value: the fraction of draws at or above `t_obs`
    /// (ties count toward rejection).
    pub fn pvalue_mc(&self, t_obs: f64, n_boot: usize, seed: u64) -> Result<f64> {
        if n_boot == 0 {
            return Err(Error::InvalidParameter("n_boot must be >= 1".into()));
        }
        let draws = self.sample(n_boot, seed);
        Ok(pvalue_from_draws(&draws, t_obs))
    }

    /// Monte Carlo quantile: the ceiling order statistic of `n_boot` draws.
    pub fn quantile_mc(&self, level: f64, n_boot: usize, seed: u64) -> Result<f64> {
        if n_boot == 0 {
            return Err(Error::InvalidParameter("n_boot must be >= 1".into()));
        }
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "quantile level must be in (0, 1), got {level}"
            )));
        }
        let mut draws = self.sample(n_boot, seed);
        draws.sort_by(f64::total_cmp);
        Ok(quantile_from_sorted(&draws, level))
    }

    /// Analytic CDF of the mixture, the cross-check for the Monte Carlo path.
    ///
    /// Central mixtures use a gamma-series expansion (the mixture law is
    /// rewritten as a convex combination of chi-square CDFs with recursively
    /// computed coefficients), accurate to the series tolerance whenever the
    /// weight spread allows convergence. Noncentral mixtures, and central
    /// ones whose weight ratio stalls the series, fall back to matching the
    /// first three cumulants `kappa_r = 2^(r-1) (r-1)! sum theta^r (1 + r
    /// delta^2)` to a shifted gamma, which is exact for (scaled) chi-squares.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        Ok(self.cdf_many(&[t])?[0])
    }

    /// Analytic CDF at many points, sharing the series coefficients across
    /// evaluations. See [`cdf`](Self::cdf).
    pub fn cdf_many(&self, ts: &[f64]) -> Result<Vec<f64>> {
        let total: f64 = self.weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidParameter(
                "the analytic CDF needs a positive total weight".into(),
            ));
        }
        if self.shifts.iter().all(|d| *d == 0.0) {
            if let Some(series) = GammaSeries::build(&self.weights) {
                return Ok(ts.iter().map(|&t| series.eval(t)).collect());
            }
        }
        Ok(ts.iter().map(|&t| self.cdf_shifted_gamma(t)).collect())
    }

    /// Three-cumulant shifted-gamma approximation (noncentral capable).
    fn cdf_shifted_gamma(&self, t: f64) -> f64 {
        let mut k1 = 0.0;
        let mut k2 = 0.0;
        let mut k3 = 0.0;
        for (w, d) in self.weights.iter().zip(&self.shifts) {
            let d2 = d * d;
            k1 += w * (1.0 + d2);
            k2 += 2.0 * w * w * (1.0 + 2.0 * d2);
            k3 += 8.0 * w * w * w * (1.0 + 3.0 * d2);
        }
        let scale = k3 / (2.0 * k2);
        let shape = k2 / (scale * scale);
        let shift = k1 - shape * scale;
        let x = (t - shift) / scale;
        if x <= 0.0 {
            return 0.0;
        }
        regularized_lower_gamma(shape, x)
    }
}

/// Precomputed gamma-series expansion of a central mixture CDF.
///
/// With `beta = theta_min`, `P(U <= t) = sum_k a_k P(chi2_(m+2k) <= t/beta)`
/// where the `a_k` are nonnegative and sum to one, so the truncation error
/// is bounded by the unaccumulated coefficient mass. `build` returns None
/// when the weight spread keeps the series from converging within the term
/// budget; callers then fall back to the shifted-gamma approximation.
struct GammaSeries {
    beta: f64,
    half_dof: f64,
    coefficients: Vec<f64>,
}

impl GammaSeries {
    const SERIES_TOL: f64 = 1e-12;
    const MAX_TERMS: usize = 8000;

    fn build(weights: &[f64]) -> Option<Self> {
        // Trailing weights with negligible cumulative mass only slow the
        // series down; dropping them moves the CDF by a comparable amount.
        let total: f64 = weights.iter().sum();
        let mut kept: Vec<f64> = Vec::with_capacity(weights.len());
        let mut tail = 0.0;
        for &w in weights.iter().rev() {
            if kept.is_empty() && tail + w <= 1e-9 * total {
                tail += w;
                continue;
            }
            kept.push(w);
        }
        kept.reverse();
        if kept.is_empty() {
            return None;
        }
        let m = kept.len();
        let beta = kept[m - 1]; // smallest positive weight
        let ratios: Vec<f64> = kept.iter().map(|w| 1.0 - beta / w).collect();

        let mut coefficients = Vec::with_capacity(64);
        coefficients.push((0.5 * kept.iter().map(|w| (beta / w).ln()).sum::<f64>()).exp());
        let mut mass = coefficients[0];
        let mut g: Vec<f64> = Vec::with_capacity(64);
        let mut ratio_pow: Vec<f64> = vec![1.0; m];
        for k in 1..=Self::MAX_TERMS {
            if 1.0 - mass < Self::SERIES_TOL {
                break;
            }
            for (pow, r) in ratio_pow.iter_mut().zip(&ratios) {
                *pow *= r;
            }
            g.push(ratio_pow.iter().sum::<f64>() / 2.0);
            let mut ak = 0.0;
            for (j, aj) in coefficients.iter().enumerate() {
                ak += aj * g[k - 1 - j];
            }
            ak /= k as f64;
            coefficients.push(ak);
            mass += ak;
        }
        if 1.0 - mass >= Self::SERIES_TOL {
            return None;
        }
        Some(GammaSeries {
            beta,
            half_dof: m as f64 / 2.0,
            coefficients,
        })
    }

    fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let x = t / self.beta;
        // F = P(chi2_(m+2k) <= x), stepped down by D each term.
        let mut f = regularized_lower_gamma(self.half_dof, x / 2.0);
        let mut d = (self.half_dof * (x / 2.0).ln()
            - x / 2.0
            - crate::special::ln_gamma(self.half_dof + 1.0))
        .exp();
        let mut acc = 0.0;
        for (k, &ak) in self.coefficients.iter().enumerate() {
            if k > 0 {
                f -= d;
                d *= (x / 2.0) / (self.half_dof + k as f64);
            }
            acc += ak * f.max(0.0);
        }
        acc.clamp(0.0, 1.0)
    }
}

/// Fraction of draws at or above `t_obs` (the counting p-value).
pub fn pvalue_from_draws(draws: &[f64], t_obs: f64) -> f64 {
    let s = draws.iter().filter(|u| **u >= t_obs).count();
    s as f64 / draws.len() as f64
}

/// Type-1 (ceiling order statistic) empirical quantile of sorted draws.
pub fn quantile_from_sorted(sorted: &[f64], level: f64) -> f64 {
    let n = sorted.len();
    let rank = (level * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}
