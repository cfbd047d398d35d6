//! Discrete wavelet transform (pyramid algorithm), multilevel decomposition,
//! and approximation-only denoising.

mod filters;
mod transform;

pub use filters::{WaveletFamily, WaveletFilter};
pub use transform::{
    denoise, dwt_single, idwt_single, wavedec, waverec, BoundaryMode, WaveletDecomposition,
};
