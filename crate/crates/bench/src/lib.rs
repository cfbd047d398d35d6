//! Shared fixtures for the criterion benches.

use breakcast_core::ingest::{build_windows, encode_regimes, WindowedDataset};
use breakcast_core::synthetic::{regime_ar_series, step_series};

pub fn segmentation_input(n: usize) -> Vec<f64> {
    step_series(7, n, 500, 0.5)
}

/// Windowed dataset over the standard synthetic regime series.
pub fn training_windows(n: usize, window: usize) -> WindowedDataset {
    let series = regime_ar_series(5, n);
    let set = breakcast_core::breaks::BreakpointSet {
        indices: series.true_breaks.clone(),
        method: breakcast_core::breaks::BreakMethod::Pelt,
        statistics: None,
    };
    let regimes = encode_regimes(&set, n).expect("valid breaks");
    let features: Vec<&[f64]> = vec![&series.driver, &series.noise_feature];
    build_windows(&series.target, &features, &regimes, window, 1, None).expect("valid windows")
}
