//! Full-reference image quality metrics: PSNR, NQM, SSIM and MS-SSIM.
//!
//! All metrics operate in the 8-bit pixel domain (values 0..=255 stored as
//! f64), matching the conventions of the reference implementations. Color
//! images are reduced to luma (0.299 R + 0.587 G + 0.114 B) for SSIM,
//! MS-SSIM and NQM; PSNR uses the joint MSE over all channels.

mod msssim;
mod nqm;
mod report;
mod ssim;

pub use msssim::{msssim, msssim_with_levels, MSSSIM_WEIGHTS};
pub use nqm::{nqm, NqmParams};
pub use report::{evaluate_directory, metrics_for_pair, EvalOutcome, ImageMetrics, MetricAggregate, MetricReport};
pub use ssim::{ssim, ssim_map, SsimParams};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::types::{denormalize_to_u8, TensorImage};

/// An 8-bit-domain image plane stack: values in [0, 255] stored as f64.
#[derive(Debug, Clone)]
pub struct Raster {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    /// channel-major, `data[c][y][x] = data[c*h*w + y*w + x]`
    pub data: Vec<f64>,
}

impl Raster {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::ShapeError(format!(
                "raster data length {} != {channels}x{height}x{width}",
                data.len()
            )));
        }
        Ok(Self { channels, height, width, data })
    }

    pub fn from_image(img: &image::DynamicImage) -> Self {
        let rgb = img.to_rgb8();
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        let mut data = vec![0.0; 3 * h * w];
        for (x, y, p) in rgb.enumerate_pixels() {
            for c in 0..3 {
                data[c * h * w + y as usize * w + x as usize] = p[c] as f64;
            }
        }
        Self { channels: 3, height: h, width: w, data }
    }

    /// Denormalize a [-1, 1] tensor image into the 8-bit domain.
    pub fn from_tensor_image(t: &TensorImage) -> Self {
        let data = t.data.iter().map(|&v| denormalize_to_u8(v) as f64).collect();
        Self { channels: t.channels, height: t.height, width: t.width, data }
    }

    /// Luma plane (BT.601 weights); grayscale input passes through.
    pub fn luma(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.height, self.width));
        let hw = self.height * self.width;
        for y in 0..self.height {
            for x in 0..self.width {
                let idx = y * self.width + x;
                let v = if self.channels >= 3 {
                    0.299 * self.data[idx] + 0.587 * self.data[hw + idx] + 0.114 * self.data[2 * hw + idx]
                } else {
                    self.data[idx]
                };
                out[[y, x]] = v;
            }
        }
        out
    }

    fn same_shape(&self, other: &Raster) -> Result<()> {
        if self.channels != other.channels || self.height != other.height || self.width != other.width {
            return Err(Error::ShapeError(format!(
                "raster shapes differ: {}x{}x{} vs {}x{}x{}",
                self.channels, self.height, self.width, other.channels, other.height, other.width
            )));
        }
        Ok(())
    }
}

/// Peak signal-to-noise ratio in dB over the joint MSE of all channels.
///
/// Identical images give `f64::INFINITY`.
pub fn psnr(pred: &Raster, reference: &Raster, peak: f64) -> Result<f64> {
    pred.same_shape(reference)?;
    let n = pred.data.len() as f64;
    let mse: f64 = pred
        .data
        .iter()
        .zip(&reference.data)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(10.0 * (peak * peak / mse).log10())
    }
}
