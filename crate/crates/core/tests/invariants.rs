//! Property tests for cross-cutting invariants.

use breakcast_core::breaks::{
    optimal_partition_bruteforce, pelt_detect, BreakMethod, BreakpointSet, CostKind, Penalty,
    PeltConfig,
};
use breakcast_core::eval::{compute_metrics, pearson_corr};
use breakcast_core::ingest::encode_regimes;
use breakcast_core::wavelet::{denoise, wavedec, waverec, BoundaryMode, WaveletFamily};
use proptest::prelude::*;

fn finite_series(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, 8..max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mae_never_exceeds_rmse(actual in finite_series(60), offset in -5.0f64..5.0) {
        let predicted: Vec<f64> = actual.iter().map(|v| v + offset).collect();
        let m = compute_metrics("fuzz", &actual, &predicted).unwrap();
        prop_assert!(m.mae <= m.rmse + 1e-12);
    }

    #[test]
    fn pearson_invariant_under_positive_affine(
        xs in finite_series(40),
        scale in 0.1f64..10.0,
        shift in -20.0f64..20.0,
    ) {
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, v)| v * 0.5 + (i as f64 * 0.7).sin()).collect();
        prop_assume!(pearson_corr(&xs, &ys).is_ok());
        let r = pearson_corr(&xs, &ys).unwrap();
        let xs2: Vec<f64> = xs.iter().map(|v| scale * v + shift).collect();
        let r2 = pearson_corr(&xs2, &ys).unwrap();
        prop_assert!((r - r2).abs() < 1e-9);
        let xs3: Vec<f64> = xs.iter().map(|v| -v).collect();
        let r3 = pearson_corr(&xs3, &ys).unwrap();
        prop_assert!((r + r3).abs() < 1e-9);
    }

    #[test]
    fn wavelet_roundtrip_identity(xs in finite_series(120), family_idx in 0usize..3) {
        let family = [WaveletFamily::Haar, WaveletFamily::Db2, WaveletFamily::Db4][family_idx];
        prop_assume!(xs.len() >= family.filter().len());
        let dec = wavedec(&xs, family, 1, BoundaryMode::Symmetric).unwrap();
        let rec = waverec(&dec).unwrap();
        let err = xs.iter().zip(&rec).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-9);
    }

    #[test]
    fn denoise_preserves_length_and_bounds_total_variation(xs in finite_series(100)) {
        let den = denoise(&xs, WaveletFamily::Haar, 1, BoundaryMode::Symmetric).unwrap();
        prop_assert_eq!(den.len(), xs.len());
        let tv = |s: &[f64]| s.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>();
        prop_assert!(tv(&den) <= tv(&xs) + 1e-9);
    }

    #[test]
    fn regime_onehot_rows_sum_to_one(len in 4usize..60, raw in prop::collection::vec(1usize..59, 0..4)) {
        let mut indices: Vec<usize> = raw.into_iter().filter(|i| *i < len).collect();
        indices.sort_unstable();
        indices.dedup();
        let set = BreakpointSet { indices, method: BreakMethod::Pelt, statistics: None };
        let labels = encode_regimes(&set, len).unwrap();
        for &l in labels.labels() {
            prop_assert!(l < labels.width());
        }
        // Exactly one hot entry per timestep by construction of the label.
        prop_assert_eq!(labels.labels().len(), len);
    }

    #[test]
    fn pelt_equals_bruteforce_on_small_series(xs in finite_series(48), beta in 0.5f64..30.0) {
        let cfg = PeltConfig {
            penalty: Penalty::Value(beta),
            min_segment: 2,
            cost: CostKind::NormalMean,
        };
        let a = pelt_detect(&xs, &cfg).unwrap();
        let b = optimal_partition_bruteforce(&xs, &cfg).unwrap();
        prop_assert_eq!(a.indices, b.indices);
    }
}
