//! Seeded generators for synthetic evaluation series: step signals for
//! segmentation checks and regime-switching AR(1) processes with exogenous
//! drivers for end-to-end forecasting runs.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::ingest::FeatureFrame;

/// Piecewise-constant signal with Gaussian noise; a new level is drawn at
/// every multiple of `segment_len`.
pub fn step_series(seed: u64, n: usize, segment_len: usize, noise_sd: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut level = 0.0;
    (0..n)
        .map(|i| {
            if i > 0 && i % segment_len == 0 {
                level += rng.random_range(-8.0..8.0f64);
            }
            level + noise_sd * rng.sample::<f64, _>(StandardNormal)
        })
        .collect()
}

/// Regime-switching AR(1) target with level shifts, plus one correlated
/// driver feature and one pure-noise feature.
#[derive(Debug, Clone)]
pub struct RegimeSeries {
    pub target: Vec<f64>,
    pub driver: Vec<f64>,
    pub noise_feature: Vec<f64>,
    pub true_breaks: Vec<usize>,
}

pub fn regime_ar_series(seed: u64, n: usize) -> RegimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let breaks = vec![n / 3, 2 * n / 3];
    let levels = [0.0, 8.0, 4.0];
    let phi = 0.9;
    let innovation_sd = 0.5;
    let observation_sd = 0.15;

    let mut state = 0.0;
    let mut driver_state = 0.0;
    let mut target = Vec::with_capacity(n);
    let mut driver = Vec::with_capacity(n);
    let mut noise_feature = Vec::with_capacity(n);
    for i in 0..n {
        let regime = breaks.iter().filter(|b| **b <= i).count();
        let eps: f64 = rng.sample(StandardNormal);
        state = phi * state + innovation_sd * eps;
        // The driver shares the target's innovation with a lag-free loading,
        // so multivariate models have something real to pick up.
        let d_eps: f64 = rng.sample(StandardNormal);
        driver_state = 0.7 * driver_state + 0.6 * eps + 0.3 * d_eps;
        let obs_noise: f64 = rng.sample(StandardNormal);
        target.push(levels[regime] + state + observation_sd * obs_noise);
        driver.push(driver_state);
        noise_feature.push(rng.sample::<f64, _>(StandardNormal));
    }
    RegimeSeries { target, driver, noise_feature, true_breaks: breaks }
}

impl RegimeSeries {
    /// Frame with synthetic daily timestamps, target column `price`.
    pub fn to_frame(&self) -> Result<FeatureFrame> {
        let base = NaiveDate::from_ymd_opt(2010, 1, 4).expect("valid date");
        let n = self.target.len();
        FeatureFrame::new(
            (0..n).map(|i| base + chrono::Days::new(i as u64)).collect(),
            "price".into(),
            self.target.clone(),
            vec!["driver".into(), "noise".into()],
            vec![self.driver.clone(), self.noise_feature.clone()],
        )
    }
}
