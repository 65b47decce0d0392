//! Multi-scale structural similarity (Wang, Simoncelli & Bovik 2003).

use ndarray::{Array2, Array};

use crate::error::{Error, Result};

use super::ssim::{ssim_map, SsimParams};
use super::Raster;

/// Published per-scale exponents for the 5-level configuration.
pub const MSSSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

/// 2x2 box filter followed by 2x subsampling.
pub(crate) fn downsample2(img: &Array2<f64>) -> Array2<f64> {
    let (h, w) = img.dim();
    let oh = h / 2;
    let ow = w / 2;
    let mut out = Array::zeros((oh, ow));
    for y in 0..oh {
        for x in 0..ow {
            out[[y, x]] = (img[[2 * y, 2 * x]]
                + img[[2 * y + 1, 2 * x]]
                + img[[2 * y, 2 * x + 1]]
                + img[[2 * y + 1, 2 * x + 1]])
                / 4.0;
        }
    }
    out
}

/// Largest level count (<= requested) for which the coarsest scale still
/// fits the SSIM window.
fn feasible_levels(mut h: usize, mut w: usize, requested: usize, window: usize) -> usize {
    let mut levels = 0;
    for _ in 0..requested {
        if h < window || w < window {
            break;
        }
        levels += 1;
        h /= 2;
        w /= 2;
    }
    levels
}

/// MS-SSIM on luma planes with an explicit level count.
///
/// Scales 1..L-1 contribute the mean contrast-structure term; the coarsest
/// scale contributes the mean of the full SSIM map. Each mean is clamped at
/// zero before exponentiation. With `levels == 1` this reduces exactly to
/// plain SSIM.
pub fn msssim_with_levels(
    pred: &Array2<f64>,
    reference: &Array2<f64>,
    levels: usize,
    p: &SsimParams,
) -> Result<f64> {
    if levels == 0 || levels > MSSSIM_WEIGHTS.len() {
        return Err(Error::Config(format!("msssim levels must be 1..=5, got {levels}")));
    }
    let (h, w) = pred.dim();
    if h < p.window || w < p.window {
        return Err(Error::ImageTooSmall { metric: "msssim", width: w, height: h, min: p.window });
    }
    let weight_sum: f64 = MSSSIM_WEIGHTS[..levels].iter().sum();
    let mut a = pred.clone();
    let mut b = reference.clone();
    let mut result = 1.0;
    for level in 0..levels {
        let (full, cs) = ssim_map(&a, &b, p)?;
        let weight = MSSSIM_WEIGHTS[level] / weight_sum;
        let term = if level + 1 == levels {
            full.mean().unwrap_or(0.0)
        } else {
            cs.mean().unwrap_or(0.0)
        };
        result *= term.max(0.0).powf(weight);
        if level + 1 < levels {
            a = downsample2(&a);
            b = downsample2(&b);
        }
    }
    Ok(result)
}

/// MS-SSIM between two rasters on luma, auto-reducing the level count for
/// small images (weights renormalized over the retained levels).
pub fn msssim(pred: &Raster, reference: &Raster, p: &SsimParams) -> Result<f64> {
    let la = pred.luma();
    let lb = reference.luma();
    let (h, w) = la.dim();
    let levels = feasible_levels(h, w, MSSSIM_WEIGHTS.len(), p.window);
    if levels == 0 {
        return Err(Error::ImageTooSmall { metric: "msssim", width: w, height: h, min: p.window });
    }
    msssim_with_levels(&la, &lb, levels, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ssim::ssim_map;

    fn ramp(h: usize, w: usize) -> Array2<f64> {
        Array::from_shape_fn((h, w), |(y, x)| ((x * 3 + y * 11) % 256) as f64)
    }

    #[test]
    fn identical_images_score_one() {
        let a = ramp(192, 192);
        let s = msssim_with_levels(&a, &a, 5, &SsimParams::default()).unwrap();
        assert!((s - 1.0).abs() < 1e-9, "msssim {s}");
    }

    #[test]
    fn single_level_equals_ssim() {
        let a = ramp(32, 32);
        let b = a.mapv(|v| 255.0 - v);
        let ms = msssim_with_levels(&a, &b, 1, &SsimParams::default()).unwrap();
        let (map, _) = ssim_map(&a, &b, &SsimParams::default()).unwrap();
        let s = map.mean().unwrap();
        // weight renormalizes to 1 at a single level but still goes through powf
        assert!((ms - s.max(0.0).powf(1.0)).abs() < 1e-6, "ms {ms} vs ssim {s}");
    }

    #[test]
    fn auto_level_reduction_on_small_images() {
        // 32x32 supports only 2 levels of the 11-tap window
        let a = Raster::new(1, 32, 32, ramp(32, 32).into_raw_vec_and_offset().0).unwrap();
        let s = msssim(&a, &a, &SsimParams::default()).unwrap();
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn tiny_image_errors() {
        let a = Raster::new(1, 8, 8, vec![1.0; 64]).unwrap();
        assert!(msssim(&a, &a, &SsimParams::default()).is_err());
    }

    #[test]
    fn downsample_halves_dims() {
        let a = ramp(33, 47);
        let d = downsample2(&a);
        assert_eq!(d.dim(), (16, 23));
        assert!((d[[0, 0]] - (a[[0, 0]] + a[[1, 0]] + a[[0, 1]] + a[[1, 1]]) / 4.0).abs() < 1e-12);
    }
}
