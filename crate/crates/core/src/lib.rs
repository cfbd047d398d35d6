//! Forecasting toolkit for nonstationary price series: structural-break
//! detection (PELT, regression-based multiple-break search, cumulative
//! sum-of-squares variance scan), wavelet denoising, and from-scratch
//! LSTM/GRU/TCN one-step-ahead regressors with deterministic training.

pub mod breaks;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod neural;
pub mod synthetic;
pub mod wavelet;

pub use error::{Error, Result};
