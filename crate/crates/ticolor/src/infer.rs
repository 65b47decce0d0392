//! Inference helpers: rebuild a generator from a checkpoint and colorize
//! arbitrary-size thermal images.
//!
//! Networks require both spatial dimensions divisible by 32, so inputs
//! are reflection-padded on the bottom/right edges up to the next
//! multiple and the output is cropped back to the original size.

use std::path::Path;

use candle_core::{DType, Device, Tensor};
use candle_nn::{VarBuilder, VarMap};

use crate::checkpoint::{load_checkpoint, restore_varmap, GEN_PREFIX};
use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::generator::{build_generator, Generator};
use crate::types::{denormalize_to_u8, TensorImage};

/// Rebuild just the generator from a training checkpoint.
pub fn load_generator(path: &Path, device: &Device) -> Result<(Generator, TrainConfig)> {
    let ckpt = load_checkpoint(path, device)?;
    let map = VarMap::new();
    let gen =
        build_generator(&ckpt.config.model, VarBuilder::from_varmap(&map, DType::F32, device))?;
    restore_varmap(&ckpt, GEN_PREFIX, &map, path)?;
    Ok((gen, ckpt.config))
}

fn reflect_extend(x: &Tensor, dim: usize, pad: usize) -> Result<Tensor> {
    if pad == 0 {
        return Ok(x.clone());
    }
    let n = x.dim(dim)?;
    if pad > n - 1 {
        return Err(Error::ShapeError(format!(
            "cannot reflection-pad {pad} past a dimension of size {n}"
        )));
    }
    // mirror without repeating the edge row/column
    let tail = x.narrow(dim, n - 1 - pad, pad)?.contiguous()?.flip(&[dim])?;
    Ok(Tensor::cat(&[x, &tail], dim)?)
}

/// Pad the bottom/right of a BCHW tensor so H and W become multiples of
/// `multiple`. Returns the padded tensor plus the original (h, w).
pub fn pad_to_multiple(x: &Tensor, multiple: usize) -> Result<(Tensor, usize, usize)> {
    let (_, _, h, w) = x.dims4()?;
    let ph = (multiple - h % multiple) % multiple;
    let pw = (multiple - w % multiple) % multiple;
    let y = reflect_extend(x, 2, ph)?;
    let y = reflect_extend(&y, 3, pw)?;
    Ok((y, h, w))
}

/// Run the generator on one thermal image of any size >= 17x17.
pub fn colorize_image(gen: &Generator, thermal: &TensorImage, device: &Device) -> Result<TensorImage> {
    let x = thermal.to_tensor(DType::F32, device)?.unsqueeze(0)?;
    let (padded, h, w) = pad_to_multiple(&x, 32)?;
    let out = gen.forward(&padded)?;
    let cropped = out.narrow(2, 0, h)?.narrow(3, 0, w)?.squeeze(0)?;
    TensorImage::from_tensor(&cropped)
}

/// Write a 3-channel image in [-1, 1] out as an 8-bit PNG.
pub fn save_rgb_png(img: &TensorImage, path: &Path) -> Result<()> {
    if img.channels != 3 {
        return Err(Error::ShapeError(format!("expected 3 channels, got {}", img.channels)));
    }
    let (w, h) = (img.width as u32, img.height as u32);
    let mut out = image::RgbImage::new(w, h);
    for (x, y, p) in out.enumerate_pixels_mut() {
        for c in 0..3 {
            p[c] = denormalize_to_u8(img.get(c, y as usize, x as usize));
        }
    }
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    out.save(path)
        .map_err(|e| Error::DecodeError { path: path.to_path_buf(), reason: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pad_reaches_multiple_and_mirrors() {
        let device = Device::Cpu;
        let x = Tensor::arange(0f32, 6.0, &device).unwrap().reshape((1, 1, 2, 3)).unwrap();
        let (y, h, w) = pad_to_multiple(&x, 2).unwrap();
        assert_eq!((h, w), (2, 3));
        assert_eq!(y.dims4().unwrap(), (1, 1, 2, 4));
        let rows: Vec<Vec<f32>> = y.squeeze(0).unwrap().squeeze(0).unwrap().to_vec2().unwrap();
        // row [0,1,2] mirrors (edge excluded) to [0,1,2,1]
        assert_eq!(rows[0], vec![0.0, 1.0, 2.0, 1.0]);
        assert_eq!(rows[1], vec![3.0, 4.0, 5.0, 4.0]);
    }

    #[test]
    fn already_aligned_input_is_untouched() {
        let device = Device::Cpu;
        let x = Tensor::zeros((1, 1, 32, 64), DType::F32, &device).unwrap();
        let (y, h, w) = pad_to_multiple(&x, 32).unwrap();
        assert_eq!((h, w), (32, 64));
        assert_eq!(y.dims4().unwrap(), (1, 1, 32, 64));
    }

    #[test]
    fn too_small_to_pad_is_an_error() {
        let device = Device::Cpu;
        let x = Tensor::zeros((1, 1, 5, 5), DType::F32, &device).unwrap();
        assert!(pad_to_multiple(&x, 32).is_err());
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.png");
        let mut img = TensorImage::zeros(3, 4, 5);
        img.data[0] = 1.0; // red channel, top-left pixel
        save_rgb_png(&img, &path).unwrap();
        let back = image::open(&path).unwrap().to_rgb8();
        assert_eq!(back.width(), 5);
        assert_eq!(back.get_pixel(0, 0)[0], 255);
        assert_eq!(back.get_pixel(0, 0)[1], 128);
    }
}
