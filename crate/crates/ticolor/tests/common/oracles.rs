//! Independent scalar-loop references for the quality metrics.
//!
//! Everything here is recomputed from scratch: plain quadruple loops for
//! the windowed statistics and a direct-sum O(N^2)-per-bin DFT for the
//! frequency-domain measure. These share no code with the library beyond
//! the constants they must agree on.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ticolor::metrics::Raster;

// ---------------------------------------------------------------- helpers

pub fn random_raster(rng: &mut ChaCha8Rng, channels: usize, h: usize, w: usize) -> Raster {
    let data = (0..channels * h * w).map(|_| rng.gen_range(0.0..=255.0)).collect();
    Raster::new(channels, h, w, data).unwrap()
}

/// Slightly structured image: smooth waves plus mild noise, so contrast
/// bands are populated and the HVS-weighted metric is well defined.
pub fn textured_raster(rng: &mut ChaCha8Rng, channels: usize, h: usize, w: usize) -> Raster {
    let mut data = Vec::with_capacity(channels * h * w);
    for c in 0..channels {
        for y in 0..h {
            for x in 0..w {
                let v = 128.0
                    + 55.0 * ((x as f64 * 0.31 + c as f64).sin() * (y as f64 * 0.23).cos())
                    + rng.gen_range(-12.0..12.0);
                data.push(v.clamp(0.0, 255.0));
            }
        }
    }
    Raster::new(channels, h, w, data).unwrap()
}

pub fn luma_of(r: &Raster) -> Vec<f64> {
    let n = r.height * r.width;
    if r.channels == 1 {
        return r.data.clone();
    }
    (0..n)
        .map(|i| 0.299 * r.data[i] + 0.587 * r.data[n + i] + 0.114 * r.data[2 * n + i])
        .collect()
}

// ------------------------------------------------------------ psnr oracle

pub fn oracle_psnr(pred: &Raster, reference: &Raster) -> f64 {
    let mut acc = 0.0;
    for (a, b) in pred.data.iter().zip(&reference.data) {
        acc += (a - b) * (a - b);
    }
    let mse = acc / pred.data.len() as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0f64 * 255.0 / mse).log10()
    }
}

// ------------------------------------------------------------ ssim oracle

pub struct Plane {
    pub h: usize,
    pub w: usize,
    pub v: Vec<f64>,
}

impl Plane {
    pub fn at(&self, y: usize, x: usize) -> f64 {
        self.v[y * self.w + x]
    }
}

pub fn oracle_gaussian(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let mut win = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let (dy, dx) = (y as f64 - c, x as f64 - c);
            win.push((-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp());
        }
    }
    let s: f64 = win.iter().sum();
    win.iter().map(|v| v / s).collect()
}

/// Mean full-SSIM and mean contrast-structure over the valid region,
/// from first principles at every window position.
pub fn oracle_ssim_means(a: &Plane, b: &Plane) -> (f64, f64) {
    let size = 11;
    let win = oracle_gaussian(size, 1.5);
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let (oh, ow) = (a.h - size + 1, a.w - size + 1);
    let mut full_sum = 0.0;
    let mut cs_sum = 0.0;
    for oy in 0..oh {
        for ox in 0..ow {
            let (mut m1, mut m2, mut s11, mut s22, mut s12) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for ky in 0..size {
                for kx in 0..size {
                    let wgt = win[ky * size + kx];
                    let pa = a.at(oy + ky, ox + kx);
                    let pb = b.at(oy + ky, ox + kx);
                    m1 += wgt * pa;
                    m2 += wgt * pb;
                    s11 += wgt * pa * pa;
                    s22 += wgt * pb * pb;
                    s12 += wgt * pa * pb;
                }
            }
            let var1 = s11 - m1 * m1;
            let var2 = s22 - m2 * m2;
            let cov = s12 - m1 * m2;
            let l = (2.0 * m1 * m2 + c1) / (m1 * m1 + m2 * m2 + c1);
            let cs = (2.0 * cov + c2) / (var1 + var2 + c2);
            full_sum += l * cs;
            cs_sum += cs;
        }
    }
    let n = (oh * ow) as f64;
    (full_sum / n, cs_sum / n)
}

pub fn oracle_ssim(pred: &Raster, reference: &Raster) -> f64 {
    let a = Plane { h: pred.height, w: pred.width, v: luma_of(pred) };
    let b = Plane { h: reference.height, w: reference.width, v: luma_of(reference) };
    oracle_ssim_means(&a, &b).0
}

// ---------------------------------------------------------- msssim oracle

pub fn oracle_downsample(p: &Plane) -> Plane {
    let (oh, ow) = (p.h / 2, p.w / 2);
    let mut v = Vec::with_capacity(oh * ow);
    for y in 0..oh {
        for x in 0..ow {
            v.push(
                (p.at(2 * y, 2 * x)
                    + p.at(2 * y + 1, 2 * x)
                    + p.at(2 * y, 2 * x + 1)
                    + p.at(2 * y + 1, 2 * x + 1))
                    / 4.0,
            );
        }
    }
    Plane { h: oh, w: ow, v }
}

pub fn oracle_msssim(pred: &Raster, reference: &Raster) -> f64 {
    let weights = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
    let mut a = Plane { h: pred.height, w: pred.width, v: luma_of(pred) };
    let mut b = Plane { h: reference.height, w: reference.width, v: luma_of(reference) };
    // independent recount of how many scales keep the window feasible
    let mut levels = 0;
    let (mut h, mut w) = (a.h, a.w);
    while levels < weights.len() && h >= 11 && w >= 11 {
        levels += 1;
        h /= 2;
        w /= 2;
    }
    assert!(levels > 0);
    let weight_sum: f64 = weights[..levels].iter().sum();
    let mut result = 1.0;
    for (level, weight) in weights[..levels].iter().enumerate() {
        let (full, cs) = oracle_ssim_means(&a, &b);
        let term = if level + 1 == levels { full } else { cs };
        result *= term.max(0.0).powf(weight / weight_sum);
        if level + 1 < levels {
            a = oracle_downsample(&a);
            b = oracle_downsample(&b);
        }
    }
    result
}

// ------------------------------------------------------------- nqm oracle

#[derive(Clone, Copy)]
pub struct Cx {
    pub re: f64,
    pub im: f64,
}

impl Cx {
    pub fn mul(self, o: Cx) -> Cx {
        Cx { re: self.re * o.re - self.im * o.im, im: self.re * o.im + self.im * o.re }
    }
    pub fn scale(self, s: f64) -> Cx {
        Cx { re: self.re * s, im: self.im * s }
    }
}

/// Direct-sum 2-D DFT: every output bin is a full double sum over the
/// image. Deliberately unrelated to any FFT library.
pub fn naive_dft2(p: &Plane) -> Vec<Cx> {
    let (h, w) = (p.h, p.w);
    let tau = std::f64::consts::TAU;
    let mut out = vec![Cx { re: 0.0, im: 0.0 }; h * w];
    for u in 0..h {
        for v in 0..w {
            let mut acc = Cx { re: 0.0, im: 0.0 };
            for y in 0..h {
                for x in 0..w {
                    let phase = -tau * (u as f64 * y as f64 / h as f64 + v as f64 * x as f64 / w as f64);
                    acc.re += p.at(y, x) * phase.cos();
                    acc.im += p.at(y, x) * phase.sin();
                }
            }
            out[u * w + v] = acc;
        }
    }
    out
}

pub fn naive_idft2_real(spec: &[Cx], h: usize, w: usize) -> Plane {
    let tau = std::f64::consts::TAU;
    let mut v = vec![0.0; h * w];
    for (yx, out) in v.iter_mut().enumerate() {
        let (y, x) = (yx / w, yx % w);
        let mut acc = 0.0;
        for u in 0..h {
            for vv in 0..w {
                let phase = tau * (u as f64 * y as f64 / h as f64 + vv as f64 * x as f64 / w as f64);
                let e = Cx { re: phase.cos(), im: phase.sin() };
                acc += spec[u * w + vv].mul(e).re;
            }
        }
        *out = acc / (h * w) as f64;
    }
    Plane { h, w, v }
}

pub fn radius(u: usize, v: usize, h: usize, w: usize) -> f64 {
    let fu = if u <= h / 2 { u as f64 } else { u as f64 - h as f64 };
    let fv = if v <= w / 2 { v as f64 } else { v as f64 - w as f64 };
    (fu * fu + fv * fv).sqrt()
}

pub fn filter_spectrum(spec: &[Cx], h: usize, w: usize, f: impl Fn(f64) -> f64) -> Vec<Cx> {
    let mut out = spec.to_vec();
    for u in 0..h {
        for v in 0..w {
            out[u * w + v] = out[u * w + v].scale(f(radius(u, v, h, w)));
        }
    }
    out
}

pub fn oracle_nqm(pred: &Raster, reference: &Raster) -> f64 {
    let pi = std::f64::consts::PI;
    let lowpass = |r: f64| {
        if r <= 1.0 {
            1.0
        } else if r <= 2.0 {
            0.5 * (1.0 + (pi * r.log2()).cos())
        } else {
            0.0
        }
    };
    let band = |r: f64, k: usize| {
        let (lo, hi) = ((1u64 << (k - 1)) as f64, (1u64 << (k + 1)) as f64);
        if r < lo || r > hi {
            0.0
        } else {
            0.5 * (1.0 + (pi * (r.log2() - k as f64)).cos())
        }
    };
    let threshold = |f: f64| {
        1.0 / (200.0 * 2.6 * (0.0192 + 0.114 * f) * (-(0.114 * f).powf(1.1)).exp())
    };
    let viewing_angle = 4.0;

    let a = Plane { h: reference.height, w: reference.width, v: luma_of(reference) };
    let b = Plane { h: pred.height, w: pred.width, v: luma_of(pred) };
    let (h, w) = (a.h, a.w);
    let spec_o = naive_dft2(&a);
    let spec_i = naive_dft2(&b);

    let mut lum_o = naive_idft2_real(&filter_spectrum(&spec_o, h, w, lowpass), h, w);
    let mut lum_i = naive_idft2_real(&filter_spectrum(&spec_i, h, w, lowpass), h, w);
    let mut restored_o = vec![0.0; h * w];
    let mut restored_i = vec![0.0; h * w];

    for k in 1..=5usize {
        let band_o = naive_idft2_real(&filter_spectrum(&spec_o, h, w, |r| band(r, k)), h, w);
        let band_i = naive_idft2_real(&filter_spectrum(&spec_i, h, w, |r| band(r, k)), h, w);
        let ct = threshold((1u64 << k) as f64 / viewing_angle);
        for i in 0..h * w {
            let div = |num: f64, den: f64| if den.abs() < 1e-12 { 0.0 } else { num / den };
            let c = div(band_o.v[i], lum_o.v[i]);
            let ci = div(band_i.v[i], lum_i.v[i]).clamp(-1.0, 1.0);
            let mut kept_o = band_o.v[i];
            let mut kept_i = band_i.v[i];
            let mask_t = ct * (0.86 * (c / ct - 1.0) + 0.3);
            if (ci - c).abs() < mask_t {
                kept_i = band_o.v[i];
            }
            if c.abs() < ct {
                kept_o = 0.0;
                kept_i = 0.0;
            }
            restored_o[i] += kept_o;
            restored_i[i] += kept_i;
            lum_o.v[i] += band_o.v[i];
            lum_i.v[i] += band_i.v[i];
        }
    }

    let signal: f64 = restored_o.iter().map(|v| v * v).sum();
    let residual: f64 =
        restored_o.iter().zip(&restored_i).map(|(x, y)| (x - y) * (x - y)).sum();
    assert!(signal > 0.0, "oracle hit a degenerate reference");
    if residual == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (signal / residual).log10()
    }
}


/// Additive Gaussian noise via Box-Muller, clamped to the pixel range.
pub fn degrade(reference: &Raster, sigma: f64, seed: u64) -> Raster {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = reference.clone();
    for v in &mut out.data {
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let n = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        *v = (*v + sigma * n).clamp(0.0, 255.0);
    }
    out
}
