//! Thermal infrared to RGB colorization.
//!
//! A conditional adversarial image-to-image translation toolkit: a
//! coarse-to-fine generator (with UNet and ResNet alternatives), a 70x70
//! patch discriminator, a four-term training objective (content,
//! adversarial, perceptual, total variation) and full-reference quality
//! metrics (PSNR, NQM, SSIM, MS-SSIM).

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod discriminator;
pub mod error;
pub mod generator;
pub mod infer;
pub mod losses;
pub mod metrics;
pub mod nn;
pub mod trainer;
pub mod types;
pub mod vgg;

pub use error::{Error, Result};
