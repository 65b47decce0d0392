//! Structural similarity index with the standard 11x11 Gaussian window.

use ndarray::Array2;

use crate::error::{Error, Result};

use super::Raster;

#[derive(Debug, Clone, Copy)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub peak: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self { window: 11, sigma: 1.5, k1: 0.01, k2: 0.03, peak: 255.0 }
    }
}

/// Normalized 2-D Gaussian window.
pub(crate) fn gaussian_window(size: usize, sigma: f64) -> Array2<f64> {
    let mut w = Array2::zeros((size, size));
    let c = (size as f64 - 1.0) / 2.0;
    for y in 0..size {
        for x in 0..size {
            let dy = y as f64 - c;
            let dx = x as f64 - c;
            w[[y, x]] = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
        }
    }
    let sum = w.sum();
    w.mapv_inplace(|v| v / sum);
    w
}

/// Valid-region correlation of `img` with `window`.
pub(crate) fn filter_valid(img: &Array2<f64>, window: &Array2<f64>) -> Array2<f64> {
    let (h, w) = img.dim();
    let (kh, kw) = window.dim();
    let oh = h - kh + 1;
    let ow = w - kw + 1;
    let mut out = Array2::zeros((oh, ow));
    for oy in 0..oh {
        for ox in 0..ow {
            let mut acc = 0.0;
            for ky in 0..kh {
                for kx in 0..kw {
                    acc += img[[oy + ky, ox + kx]] * window[[ky, kx]];
                }
            }
            out[[oy, ox]] = acc;
        }
    }
    out
}

/// Local SSIM map over the valid region of the sliding window.
pub fn ssim_map(pred: &Array2<f64>, reference: &Array2<f64>, p: &SsimParams) -> Result<(Array2<f64>, Array2<f64>)> {
    if pred.dim() != reference.dim() {
        return Err(Error::ShapeError(format!("ssim shapes differ: {:?} vs {:?}", pred.dim(), reference.dim())));
    }
    let (h, w) = pred.dim();
    if h < p.window || w < p.window {
        return Err(Error::ImageTooSmall { metric: "ssim", width: w, height: h, min: p.window });
    }
    let win = gaussian_window(p.window, p.sigma);
    let c1 = (p.k1 * p.peak).powi(2);
    let c2 = (p.k2 * p.peak).powi(2);

    let mu1 = filter_valid(pred, &win);
    let mu2 = filter_valid(reference, &win);
    let s11 = filter_valid(&(pred * pred), &win);
    let s22 = filter_valid(&(reference * reference), &win);
    let s12 = filter_valid(&(pred * reference), &win);

    let (oh, ow) = mu1.dim();
    let mut full = Array2::zeros((oh, ow));
    let mut cs = Array2::zeros((oh, ow));
    for y in 0..oh {
        for x in 0..ow {
            let (m1, m2) = (mu1[[y, x]], mu2[[y, x]]);
            let var1 = s11[[y, x]] - m1 * m1;
            let var2 = s22[[y, x]] - m2 * m2;
            let cov = s12[[y, x]] - m1 * m2;
            let l = (2.0 * m1 * m2 + c1) / (m1 * m1 + m2 * m2 + c1);
            let c = (2.0 * cov + c2) / (var1 + var2 + c2);
            full[[y, x]] = l * c;
            cs[[y, x]] = c;
        }
    }
    Ok((full, cs))
}

/// Mean SSIM between two rasters, computed on luma.
pub fn ssim(pred: &Raster, reference: &Raster, p: &SsimParams) -> Result<f64> {
    let (map, _) = ssim_map(&pred.luma(), &reference.luma(), p)?;
    Ok(map.mean().unwrap_or(0.0))
}
