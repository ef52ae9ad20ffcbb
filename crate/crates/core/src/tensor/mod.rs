//! Minimal reverse-mode automatic differentiation over dense real tensors.
//!
//! Complex quantities are stored as `[2, H, W]` tensors holding the real and
//! imaginary planes; the FFT and spectral-multiply ops act on that layout.

mod adam;
mod conv;
mod scalar;
mod tape;
mod value;

pub use adam::{AdamConfig, AdamState};
pub use scalar::Real;
pub use tape::{Conv2dOptions, Tape, Var};
pub use value::Tensor;
