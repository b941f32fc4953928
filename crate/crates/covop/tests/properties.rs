//! Property tests for the algebraic invariants of the pipeline.

use nalgebra::DMatrix;
use proptest::prelude::*;

use covop::estimators::sample_cov;
use covop::hilbert::{FunctionalSample, Grid, KernelOperator};
use covop::mixture::ChiSquareMixture;

fn grid_and_rows() -> impl Strategy<Value = (usize, Vec<Vec<f64>>)> {
    (3usize..8, 3usize..9).prop_flat_map(|(p, n)| {
        let row = proptest::collection::vec(-10.0..10.0f64, p);
        proptest::collection::vec(row, n).prop_map(move |rows| (p, rows))
    })
}

fn sample_of(p: usize, rows: &[Vec<f64>]) -> FunctionalSample {
    let grid = Grid::uniform(0.0, 1.0, p).unwrap();
    let values = DMatrix::from_fn(rows.len(), p, |j, m| rows[j][m]);
    FunctionalSample::new(grid, values, "prop").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inner_product_bilinear_symmetric((p, rows) in grid_and_rows()) {
        prop_assume!(rows.len() >= 2);
        let grid = Grid::uniform(0.0, 1.0, p).unwrap();
        let u = &rows[0];
        let v = &rows[1];
        let uv = grid.inner_product(u, v).unwrap();
        let vu = grid.inner_product(v, u).unwrap();
        prop_assert_eq!(uv, vu);
        let doubled: Vec<f64> = u.iter().map(|x| 2.0 * x).collect();
        let got = grid.inner_product(&doubled, v).unwrap();
        prop_assert!((got - 2.0 * uv).abs() <= 1e-9 * (1.0 + uv.abs()));
    }

    #[test]
    fn covariance_permutation_invariant_bitwise((p, rows) in grid_and_rows()) {
        let s = sample_of(p, &rows);
        let mut reversed = rows.clone();
        reversed.reverse();
        let r = sample_of(p, &reversed);
        let a = sample_cov(&s).unwrap();
        let b = sample_cov(&r).unwrap();
        prop_assert_eq!(a.kernel(), b.kernel());
    }

    #[test]
    fn covariance_scales_quadratically((p, rows) in grid_and_rows()) {
        let s = sample_of(p, &rows);
        let scaled_rows: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(|x| 2.0 * x).collect())
            .collect();
        let t = sample_of(p, &scaled_rows);
        let a = sample_cov(&s).unwrap();
        let b = sample_cov(&t).unwrap();
        for (x, y) in a.kernel().iter().zip(b.kernel().iter()) {
            prop_assert_eq!((4.0 * x).to_bits(), y.to_bits());
        }
    }

    #[test]
    fn covariance_is_psd((p, rows) in grid_and_rows()) {
        let s = sample_of(p, &rows);
        let cov = sample_cov(&s).unwrap();
        let min_rel = cov.min_relative_eigenvalue().unwrap();
        prop_assert!(min_rel >= -1e-8, "min relative eigenvalue {}", min_rel);
    }

    #[test]
    fn hs_norm_triangle_inequality((p, rows) in grid_and_rows()) {
        prop_assume!(rows.len() >= 4);
        let grid = Grid::uniform(0.0, 1.0, p).unwrap();
        let a = KernelOperator::tensor_product(&rows[0], &rows[1], &grid).unwrap();
        let b = KernelOperator::tensor_product(&rows[2], &rows[3], &grid).unwrap();
        let sum = a.add(&b).unwrap();
        prop_assert!(sum.hs_norm() <= a.hs_norm() + b.hs_norm() + 1e-9);
    }

    #[test]
    fn mixture_pvalue_monotone(
        weights in proptest::collection::vec(0.01..5.0f64, 1..6),
        t1 in 0.0..30.0f64,
        gap in 0.0..30.0f64,
        seed in 0..50u64,
    ) {
        let mut w = weights;
        w.sort_by(|a, b| b.total_cmp(a));
        let mix = ChiSquareMixture::new(w).unwrap();
        let p1 = mix.pvalue_mc(t1, 500, seed).unwrap();
        let p2 = mix.pvalue_mc(t1 + gap, 500, seed).unwrap();
        prop_assert!(p2 <= p1);
    }

    #[test]
    fn mixture_mean_matches_draws(
        weights in proptest::collection::vec(0.1..3.0f64, 1..5),
        seed in 0..20u64,
    ) {
        let mut w = weights;
        w.sort_by(|a, b| b.total_cmp(a));
        let mix = ChiSquareMixture::new(w).unwrap();
        let draws = mix.sample(4000, seed);
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let se = (mix.variance() / draws.len() as f64).sqrt();
        prop_assert!((mean - mix.mean()).abs() <= 5.0 * se);
    }

    #[test]
    fn csv_roundtrip_identity((p, rows) in grid_and_rows()) {
        prop_assume!(rows.len() >= 2);
        let s = sample_of(p, &rows).relabeled("g");
        let mut buf = Vec::new();
        covop::csvio::export_wide_csv(std::slice::from_ref(&s), &mut buf).unwrap();
        let back = covop::csvio::ingest_csv(buf.as_slice(), covop::csvio::Layout::Wide).unwrap();
        prop_assert_eq!(back.len(), 1);
        prop_assert_eq!(back[0].values(), s.values());
        prop_assert_eq!(back[0].grid(), s.grid());
    }
}
