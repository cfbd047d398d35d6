//! Loading, validation, chronological splitting, scaling, and windowing of
//! timestamp-aligned multivariate series.

mod frame;
mod scaler;
mod window;

pub use frame::{load_csv, split_chronological, CsvSchema, FeatureFrame, FeatureSelect, SplitSpec};
pub use scaler::{fit_scaler, ColumnStats, Scaler};
pub use window::{build_windows, encode_regimes, InputLayout, RegimeLabels, WindowedDataset};
