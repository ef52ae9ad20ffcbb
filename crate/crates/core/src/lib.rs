//! Untrained, physics-driven reconstruction of digital in-line holograms.
//!
//! A convolutional autoencoder maps a captured hologram to a complex object
//! estimate, which is pushed through angular-spectrum propagation and compared
//! against the measurement. When the object distance is unknown, the
//! reverse-attention loss weights every candidate distance by a softmax over
//! inverse losses (treated as constants during backward), so one optimization
//! run both reconstructs the object and picks the distance.
//!
//! Module map:
//!
//! * [`tensor`]: a small reverse-mode autodiff tape and Adam.
//! * [`optics`]: transfer functions, propagation and hologram synthesis.
//! * [`network`]: the untrained hourglass autoencoder.
//! * [`losses`]: hologram MSE and the reverse-attention weighting.
//! * [`strategies`]: the reconstruction loop and every comparison strategy.
//! * [`quadratic`]: convergence lab on synthetic noisy quadratics.
//! * [`metrics`]: PSNR and SSIM.
//! * [`runner`]: configuration, file formats and experiment orchestration.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod losses;
pub mod metrics;
pub mod network;
pub mod optics;
pub mod plane;
pub mod quadratic;
pub mod runner;
pub mod spectral;
pub mod strategies;
pub mod tensor;

pub use error::{Error, Result};
pub use plane::Plane;
