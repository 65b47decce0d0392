//! Noise quality measure (Damera-Venkata et al. 2000).
//!
//! Both images are decomposed into octave-spaced frequency bands with
//! Peli's cosine-log filter bank. Band-limited contrasts are thresholded
//! against a contrast sensitivity function and masked by the reference
//! image's contrast; the measure is the SNR in dB between the reconstructed
//! "model restored" reference and test images.
//!
//! Constants used here (documented for reproducibility):
//! - radial frequency grid in cycles/image; band k in 1..=5 is the
//!   cosine-log filter 0.5*(1+cos(pi*(log2 r - k))) supported on
//!   [2^(k-1), 2^(k+1)], the low-pass residual covers r <= 2
//! - contrast threshold function: 1 / (200 * 2.6 * (0.0192 + 0.114 f) *
//!   exp(-(0.114 f)^1.1)) with f in cycles/degree (Mannos-Sakrison CSF)
//! - band center frequency in cycles/degree: 2^k / viewing_angle
//! - masking threshold: ct * (0.86 * (c/ct - 1) + 0.3); test-band
//!   differences below it are replaced by the reference band
//! - test contrast magnitude clamped to 1 before masking

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

use super::Raster;

#[derive(Debug, Clone, Copy)]
pub struct NqmParams {
    /// Angle (degrees) the image subtends at the eye.
    pub viewing_angle: f64,
    /// Number of octave bands; 5 in the reference formulation.
    pub bands: usize,
}

impl Default for NqmParams {
    fn default() -> Self {
        Self { viewing_angle: 4.0, bands: 5 }
    }
}

const MIN_DIM: usize = 16;

/// Contrast threshold at radial frequency `f` cycles/degree.
pub(crate) fn contrast_threshold(f: f64) -> f64 {
    1.0 / (200.0 * 2.6 * (0.0192 + 0.114 * f) * (-(0.114 * f).powf(1.1)).exp())
}

/// Cosine-log band filter response at radius `r` (cycles/image).
pub(crate) fn band_response(r: f64, k: usize) -> f64 {
    let lo = (1u64 << (k - 1)) as f64;
    let hi = (1u64 << (k + 1)) as f64;
    if r < lo || r > hi {
        0.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI * (r.log2() - k as f64)).cos())
    }
}

/// Low-pass residual response at radius `r`.
pub(crate) fn lowpass_response(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r <= 2.0 {
        0.5 * (1.0 + (std::f64::consts::PI * r.log2()).cos())
    } else {
        0.0
    }
}

/// Signed frequency of FFT bin `i` out of `n`.
fn bin_freq(i: usize, n: usize) -> f64 {
    if i <= n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

fn fft2(data: &Array2<f64>) -> Array2<Complex<f64>> {
    let (h, w) = data.dim();
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft_forward(w);
    let col_fft = planner.plan_fft_forward(h);
    let mut buf: Array2<Complex<f64>> = data.mapv(|v| Complex::new(v, 0.0));
    for mut row in buf.rows_mut() {
        let mut v: Vec<Complex<f64>> = row.to_vec();
        row_fft.process(&mut v);
        for (dst, src) in row.iter_mut().zip(v) {
            *dst = src;
        }
    }
    for mut col in buf.columns_mut() {
        let mut v: Vec<Complex<f64>> = col.to_vec();
        col_fft.process(&mut v);
        for (dst, src) in col.iter_mut().zip(v) {
            *dst = src;
        }
    }
    buf
}

fn ifft2_real(data: &Array2<Complex<f64>>) -> Array2<f64> {
    let (h, w) = data.dim();
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft_inverse(w);
    let col_fft = planner.plan_fft_inverse(h);
    let mut buf = data.clone();
    for mut row in buf.rows_mut() {
        let mut v: Vec<Complex<f64>> = row.to_vec();
        row_fft.process(&mut v);
        for (dst, src) in row.iter_mut().zip(v) {
            *dst = src;
        }
    }
    for mut col in buf.columns_mut() {
        let mut v: Vec<Complex<f64>> = col.to_vec();
        col_fft.process(&mut v);
        for (dst, src) in col.iter_mut().zip(v) {
            *dst = src;
        }
    }
    let scale = 1.0 / (h * w) as f64;
    buf.mapv(|c| c.re * scale)
}

fn apply_radial_filter<F: Fn(f64) -> f64>(spectrum: &Array2<Complex<f64>>, f: F) -> Array2<Complex<f64>> {
    let (h, w) = spectrum.dim();
    let mut out = spectrum.clone();
    for y in 0..h {
        for x in 0..w {
            let r = (bin_freq(y, h).powi(2) + bin_freq(x, w).powi(2)).sqrt();
            out[[y, x]] *= f(r);
        }
    }
    out
}

fn guarded_div(num: &Array2<f64>, den: &Array2<f64>) -> Array2<f64> {
    let mut out = num.clone();
    for (o, d) in out.iter_mut().zip(den.iter()) {
        *o = if d.abs() < 1e-12 { 0.0 } else { *o / d };
    }
    out
}

/// NQM on luma planes: `pred` is the test image, `reference` the original.
pub fn nqm_planes(pred: &Array2<f64>, reference: &Array2<f64>, p: &NqmParams) -> Result<f64> {
    if pred.dim() != reference.dim() {
        return Err(Error::ShapeError(format!("nqm shapes differ: {:?} vs {:?}", pred.dim(), reference.dim())));
    }
    let (h, w) = reference.dim();
    if h < MIN_DIM || w < MIN_DIM {
        return Err(Error::ImageTooSmall { metric: "nqm", width: w, height: h, min: MIN_DIM });
    }
    if p.bands == 0 || p.bands > 10 {
        return Err(Error::Config(format!("nqm bands must be 1..=10, got {}", p.bands)));
    }

    let spec_o = fft2(reference);
    let spec_i = fft2(pred);

    // cumulative luminance starts from the low-pass residual
    let mut lum_o = ifft2_real(&apply_radial_filter(&spec_o, lowpass_response));
    let mut lum_i = ifft2_real(&apply_radial_filter(&spec_i, lowpass_response));

    let mut restored_o: Array2<f64> = Array2::zeros((h, w));
    let mut restored_i: Array2<f64> = Array2::zeros((h, w));

    for k in 1..=p.bands {
        let band_o = ifft2_real(&apply_radial_filter(&spec_o, |r| band_response(r, k)));
        let band_i = ifft2_real(&apply_radial_filter(&spec_i, |r| band_response(r, k)));

        let contrast_o = guarded_div(&band_o, &lum_o);
        let contrast_i = guarded_div(&band_i, &lum_i).mapv(|v| v.clamp(-1.0, 1.0));

        let ct = contrast_threshold((1u64 << k) as f64 / p.viewing_angle);
        let mut kept_o = band_o.clone();
        let mut kept_i = band_i.clone();
        for idx in 0..h * w {
            let pos = (idx / w, idx % w);
            let c = contrast_o[pos];
            let ci = contrast_i[pos];
            // contrast masking: imperceptible differences follow the reference
            let mask_t = ct * (0.86 * (c / ct - 1.0) + 0.3);
            if (ci - c).abs() < mask_t {
                kept_i[pos] = band_o[pos];
            }
            // detection threshold: invisible reference contrast drops out
            if c.abs() < ct {
                kept_o[pos] = 0.0;
                kept_i[pos] = 0.0;
            }
        }
        restored_o += &kept_o;
        restored_i += &kept_i;
        lum_o += &band_o;
        lum_i += &band_i;
    }

    let signal: f64 = restored_o.iter().map(|v| v * v).sum();
    if signal == 0.0 {
        return Err(Error::DegenerateInput("nqm"));
    }
    let residual: f64 = restored_o.iter().zip(restored_i.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    if residual == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal / residual).log10())
}

/// NQM between two rasters on luma.
pub fn nqm(pred: &Raster, reference: &Raster, p: &NqmParams) -> Result<f64> {
    nqm_planes(&pred.luma(), &reference.luma(), p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array;

    fn textured(h: usize, w: usize) -> Array2<f64> {
        Array::from_shape_fn((h, w), |(y, x)| {
            128.0 + 60.0 * ((x as f64 * 0.7).sin() * (y as f64 * 0.4).cos()) + ((x * y) % 17) as f64
        })
    }

    #[test]
    fn identical_images_very_high_db() {
        let a = textured(32, 32);
        let v = nqm_planes(&a, &a, &NqmParams::default()).unwrap();
        assert!(v > 50.0, "nqm {v}");
    }

    #[test]
    fn constant_image_is_degenerate_not_nan() {
        let a = Array2::from_elem((32, 32), 128.0);
        let b = Array2::from_elem((32, 32), 100.0);
        match nqm_planes(&b, &a, &NqmParams::default()) {
            Err(Error::DegenerateInput(_)) => {}
            Ok(v) => assert!(v.is_finite() || v.is_infinite(), "never NaN, got {v}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn small_image_errors() {
        let a = textured(8, 8);
        assert!(nqm_planes(&a, &a, &NqmParams::default()).is_err());
    }

    #[test]
    fn noisier_image_scores_lower() {
        use rand::prelude::*;
        let a = textured(64, 64);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let noise: Vec<f64> = (0..64 * 64).map(|_| rng.gen::<f64>() - 0.5).collect();
        let mk = |sigma: f64| {
            let mut b = a.clone();
            for (v, n) in b.iter_mut().zip(&noise) {
                *v += sigma * n * 3.46; // uniform scaled to roughly unit variance
            }
            b
        };
        let low = nqm_planes(&mk(5.0), &a, &NqmParams::default()).unwrap();
        let high = nqm_planes(&mk(25.0), &a, &NqmParams::default()).unwrap();
        assert!(high < low, "nqm sigma25 {high} !< sigma5 {low}");
    }

    #[test]
    fn band_filters_partition_midrange() {
        // lowpass + bands sum to 1 for radii inside the covered range
        for &r in &[0.5, 1.3, 2.0, 3.7, 8.0, 13.0, 30.0] {
            let total: f64 = lowpass_response(r) + (1..=5).map(|k| band_response(r, k)).sum::<f64>();
            assert!((total - 1.0).abs() < 1e-12, "r={r} total={total}");
        }
    }
}
